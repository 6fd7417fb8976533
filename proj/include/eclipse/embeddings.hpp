#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "eclipse/attention.hpp"
#include "eclipse/params.hpp"
#include "eclipse/rng.hpp"
#include "eclipse/types.hpp"

namespace eclipse {

enum class SamplingStrategy { Uniform, RandomSegment };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy sampling_strategy_from_string(std::string_view name);

/// Picks `count` strictly increasing frame indices out of `total_frames`.
///
/// Uniform spaces them linearly with both endpoints included (floor rounding).
/// RandomSegment cuts the clip into `count` equal segments and draws one index per segment.
std::vector<std::size_t> sample_frames(std::size_t total_frames, std::size_t count, SamplingStrategy strategy,
                                       std::uint64_t seed);

/// Frames T×H×W×3 → non-overlapping P×P patches T×N×3P², row-major over the patch grid,
/// each patch flattened channel-last.
Tensor patchify(const VideoClip& clip, std::size_t patch);
Tensor unpatchify(const Tensor& patches, std::size_t height, std::size_t width, std::size_t patch);

struct VideoEmbedParams {
    Tensor patch_weight;  // 3P² × d
    Tensor patch_bias;    // d
    Tensor cls;           // d
    Tensor spatial_pos;   // (N+1) × d, shared by all frames
    Tensor temporal_pos;  // T × d, shared by all tokens of a frame

    static VideoEmbedParams create(std::size_t patch, std::size_t patches, std::size_t frames, std::size_t d,
                                   Rng& rng, ParamStore& store);
    std::size_t patch_dim() const { return patch_weight.dim(0); }
    std::size_t width() const { return patch_weight.dim(1); }
};

/// Linear patch embedding, per-frame CLS prepended, plus factorized spatial and temporal positions.
TokenGrid embed_video(const Tensor& patches, const VideoEmbedParams& params);

/// Maps each timestep's spectrogram to one d-dimensional audio embedding.
class AudioEncoder {
public:
    virtual ~AudioEncoder() = default;
    virtual std::size_t output_dim() const = 0;
    virtual AudioTrack encode(const AudioSpectrogram& spect) const = 0;
};

/// Mean-pools each M×C spectrogram over its M rows, then a C→hidden→d GELU perceptron.
class ToyAudioEncoder final : public AudioEncoder {
public:
    ToyAudioEncoder() = default;
    ToyAudioEncoder(std::size_t channels, std::size_t hidden, std::size_t d, Rng& rng, ParamStore& store);

    std::size_t output_dim() const override { return w2_.dim(1); }
    std::size_t channels() const { return w1_.dim(0); }
    std::size_t hidden() const { return w1_.dim(1); }
    AudioTrack encode(const AudioSpectrogram& spect) const override;

private:
    Tensor w1_;
    Tensor b1_;
    Tensor w2_;
    Tensor b2_;
};

/// Checks the encoder width against the model width before encoding.
AudioTrack encode_audio(const AudioSpectrogram& spect, const AudioEncoder& encoder, std::size_t d);

struct TextLayerParams {
    LayerNormParams attn_norm;
    MhaParams attn;
    FeedForwardParams ffn;
};

/// Toy text encoder. Row `vocab` of the token table is the CLS token, prepended to every sequence.
struct TextEncoderParams {
    Tensor token_table;  // (vocab+1) × d
    Tensor positions;    // (max_tokens+1) × d
    std::vector<TextLayerParams> layers;
    std::size_t vocab = 0;
    std::size_t max_tokens = 0;

    static TextEncoderParams create(std::size_t vocab, std::size_t max_tokens, std::size_t d, std::size_t heads,
                                    std::size_t num_layers, Rng& rng, ParamStore& store);
    std::size_t cls_id() const { return vocab; }
};

/// Returns the CLS position's final state g (shape d).
Tensor encode_text(const TextSequence& seq, const TextEncoderParams& params);

}  // namespace eclipse
