#include "eclipse/embeddings.hpp"

#include <stdexcept>
#include <string>

#include "eclipse/ops.hpp"

namespace eclipse {

std::string_view to_string(SamplingStrategy s) {
    return s == SamplingStrategy::Uniform ? "uniform" : "random_segment";
}

SamplingStrategy sampling_strategy_from_string(std::string_view name) {
    if (name == "uniform") return SamplingStrategy::Uniform;
    if (name == "random_segment") return SamplingStrategy::RandomSegment;
    throw std::invalid_argument("unknown sampling strategy '" + std::string(name) + "'");
}

std::vector<std::size_t> sample_frames(std::size_t total_frames, std::size_t count, SamplingStrategy strategy,
                                       std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("sample_frames: need at least one frame");
    if (count > total_frames) {
        throw std::invalid_argument("sample_frames: cannot draw " + std::to_string(count) + " frames from " +
                                    std::to_string(total_frames));
    }
    std::vector<std::size_t> indices(count);
    if (strategy == SamplingStrategy::Uniform) {
        if (count == 1) {
            indices[0] = (total_frames - 1) / 2;
            return indices;
        }
        for (std::size_t i = 0; i < count; ++i) indices[i] = i * (total_frames - 1) / (count - 1);
        return indices;
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t lo = i * total_frames / count;
        const std::size_t hi = (i + 1) * total_frames / count - 1;
        indices[i] = rng.uniform_int(lo, hi);
    }
    return indices;
}

Tensor patchify(const VideoClip& clip, std::size_t patch) {
    const Tensor& frames = clip.frames;
    if (frames.rank() != 4 || frames.dim(3) != 3) {
        throw ShapeError("patchify: frames must be T×H×W×3, got " + format_shape(frames.shape()));
    }
    const std::size_t t_count = frames.dim(0), height = frames.dim(1), width = frames.dim(2);
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
        throw ShapeError("patchify: frame " + std::to_string(height) + "x" + std::to_string(width) +
                         " not divisible by patch size " + std::to_string(patch));
    }
    const std::size_t grid_w = width / patch;
    const std::size_t n = (height / patch) * grid_w;
    const std::size_t pdim = 3 * patch * patch;
    std::vector<double> out(t_count * n * pdim);
    const auto src = frames.data();
    for (std::size_t t = 0; t < t_count; ++t) {
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t row0 = (p / grid_w) * patch;
            const std::size_t col0 = (p % grid_w) * patch;
            double* dst = out.data() + (t * n + p) * pdim;
            for (std::size_t i = 0; i < patch; ++i) {
                const std::size_t offset = ((t * height + row0 + i) * width + col0) * 3;
                std::copy_n(src.data() + offset, patch * 3, dst + i * patch * 3);
            }
        }
    }
    return Tensor::from({t_count, n, pdim}, std::move(out));
}

Tensor unpatchify(const Tensor& patches, std::size_t height, std::size_t width, std::size_t patch) {
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
        throw ShapeError("unpatchify: frame " + std::to_string(height) + "x" + std::to_string(width) +
                         " not divisible by patch size " + std::to_string(patch));
    }
    const std::size_t grid_w = width / patch;
    const std::size_t n = (height / patch) * grid_w;
    const std::size_t pdim = 3 * patch * patch;
    if (patches.rank() != 3 || patches.dim(1) != n || patches.dim(2) != pdim) {
        throw ShapeError("unpatchify: patches " + format_shape(patches.shape()) + " do not tile " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    const std::size_t t_count = patches.dim(0);
    std::vector<double> out(t_count * height * width * 3);
    const auto src = patches.data();
    for (std::size_t t = 0; t < t_count; ++t) {
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t row0 = (p / grid_w) * patch;
            const std::size_t col0 = (p % grid_w) * patch;
            const double* from = src.data() + (t * n + p) * pdim;
            for (std::size_t i = 0; i < patch; ++i) {
                const std::size_t offset = ((t * height + row0 + i) * width + col0) * 3;
                std::copy_n(from + i * patch * 3, patch * 3, out.data() + offset);
            }
        }
    }
    return Tensor::from({t_count, height, width, 3}, std::move(out));
}

VideoEmbedParams VideoEmbedParams::create(std::size_t patch, std::size_t patches, std::size_t frames, std::size_t d,
                                          Rng& rng, ParamStore& store) {
    const auto group = ParamGroup::NewModules;
    const std::size_t pdim = 3 * patch * patch;
    VideoEmbedParams p;
    p.patch_weight = store.add("video.patch_weight", rng.xavier_uniform(pdim, d), group);
    p.patch_bias = store.add("video.patch_bias", Tensor::zeros({d}), group);
    p.cls = store.add("video.cls", rng.normal_tensor({d}, 0.02), group);
    p.spatial_pos = store.add("video.spatial_pos", rng.normal_tensor({patches + 1, d}, 0.02), group);
    p.temporal_pos = store.add("video.temporal_pos", rng.normal_tensor({frames, d}, 0.02), group);
    return p;
}

TokenGrid embed_video(const Tensor& patches, const VideoEmbedParams& params) {
    const std::size_t d = params.width();
    if (patches.rank() != 3 || patches.dim(2) != params.patch_dim()) {
        throw ShapeError("embed_video: patches " + format_shape(patches.shape()) + " but patch weight is " +
                         format_shape(params.patch_weight.shape()));
    }
    const std::size_t frames = patches.dim(0);
    const std::size_t n = patches.dim(1);
    if (params.spatial_pos.dim(0) != n + 1 || params.temporal_pos.dim(0) != frames) {
        throw ShapeError("embed_video: " + std::to_string(frames) + " frames of " + std::to_string(n) +
                         " patches vs positions " + format_shape(params.spatial_pos.shape()) + " / " +
                         format_shape(params.temporal_pos.shape()));
    }
    Tensor tokens = ops::linear(patches, params.patch_weight, params.patch_bias);
    Tensor cls = ops::add(Tensor::zeros({frames, 1, d}), ops::reshape(params.cls, {1, 1, d}));
    Tensor grid = ops::concat({cls, tokens}, 1);
    grid = ops::add(grid, params.spatial_pos);
    grid = ops::add(grid, ops::reshape(params.temporal_pos, {frames, 1, d}));
    return {grid};
}

ToyAudioEncoder::ToyAudioEncoder(std::size_t channels, std::size_t hidden, std::size_t d, Rng& rng,
                                 ParamStore& store) {
    const auto group = ParamGroup::NewModules;
    w1_ = store.add("audio.w1", rng.xavier_uniform(channels, hidden), group);
    b1_ = store.add("audio.b1", Tensor::zeros({hidden}), group);
    w2_ = store.add("audio.w2", rng.xavier_uniform(hidden, d), group);
    b2_ = store.add("audio.b2", Tensor::zeros({d}), group);
}

AudioTrack ToyAudioEncoder::encode(const AudioSpectrogram& spect) const {
    const Tensor& z = spect.spect;
    if (z.rank() != 3 || z.dim(2) != channels()) {
        throw ShapeError("audio encoder expects T×M×" + std::to_string(channels()) + ", got " +
                         format_shape(z.shape()));
    }
    Tensor pooled = ops::mean_axis(z, 1);
    Tensor hidden = ops::gelu(ops::linear(pooled, w1_, b1_));
    return {ops::linear(hidden, w2_, b2_)};
}

AudioTrack encode_audio(const AudioSpectrogram& spect, const AudioEncoder& encoder, std::size_t d) {
    if (encoder.output_dim() != d) {
        throw ShapeError("audio encoder produces width " + std::to_string(encoder.output_dim()) +
                         " but the model width is " + std::to_string(d));
    }
    return encoder.encode(spect);
}

TextEncoderParams TextEncoderParams::create(std::size_t vocab, std::size_t max_tokens, std::size_t d,
                                            std::size_t heads, std::size_t num_layers, Rng& rng, ParamStore& store) {
    const auto group = ParamGroup::PretrainedSlow;
    TextEncoderParams p;
    p.vocab = vocab;
    p.max_tokens = max_tokens;
    p.token_table = store.add("text.token_table", rng.normal_tensor({vocab + 1, d}, 0.02), group);
    p.positions = store.add("text.positions", rng.normal_tensor({max_tokens + 1, d}, 0.01), group);
    for (std::size_t l = 0; l < num_layers; ++l) {
        const std::string prefix = "text.layer" + std::to_string(l);
        TextLayerParams layer;
        layer.attn_norm = LayerNormParams::create(d, store, prefix + ".attn_norm", group);
        layer.attn = MhaParams::create(d, heads, rng, store, prefix + ".attn", group);
        layer.ffn = FeedForwardParams::create(d, rng, store, prefix + ".ffn", group);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Tensor encode_text(const TextSequence& seq, const TextEncoderParams& params) {
    if (seq.tokens.empty()) throw std::invalid_argument("encode_text: empty token sequence");
    if (seq.tokens.size() > params.max_tokens) {
        throw std::invalid_argument("encode_text: " + std::to_string(seq.tokens.size()) +
                                    " tokens exceed the limit of " + std::to_string(params.max_tokens));
    }
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size() + 1);
    ids.push_back(params.cls_id());
    for (std::size_t id : seq.tokens) {
        if (id >= params.vocab) {
            throw std::out_of_range("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(params.vocab));
        }
        ids.push_back(id);
    }
    const std::size_t len = ids.size();
    Tensor x = ops::add(ops::embedding(params.token_table, ids), ops::slice(params.positions, 0, 0, len));
    for (const auto& layer : params.layers) {
        Tensor normed = layer.attn_norm.apply(x);
        x = ops::add(x, mha(normed, normed, normed, layer.attn));
        x = layer.ffn.apply(x);
    }
    return ops::reshape(ops::slice(x, 0, 0, 1), {params.token_table.dim(1)});
}

}  // namespace eclipse
