#include "eclipse/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "eclipse/ops.hpp"

namespace eclipse {

LayerNormParams LayerNormParams::create(std::size_t d, ParamStore& store, const std::string& name,
                                        ParamGroup group) {
    return {store.add(name + ".gain", Tensor::full({d}, 1.0), group),
            store.add(name + ".bias", Tensor::zeros({d}), group)};
}

Tensor LayerNormParams::apply(const Tensor& x) const { return ops::layer_norm(x, gain, bias); }

MhaParams MhaParams::create(std::size_t d, std::size_t heads, Rng& rng, ParamStore& store,
                            const std::string& prefix, ParamGroup group) {
    if (heads == 0 || d % heads != 0) {
        throw std::invalid_argument("attention width " + std::to_string(d) + " is not divisible by " +
                                    std::to_string(heads) + " heads");
    }
    MhaParams p;
    p.w_q = store.add(prefix + ".w_q", rng.xavier_uniform(d, d), group);
    p.w_k = store.add(prefix + ".w_k", rng.xavier_uniform(d, d), group);
    p.w_v = store.add(prefix + ".w_v", rng.xavier_uniform(d, d), group);
    p.w_o = store.add(prefix + ".w_o", rng.xavier_uniform(d, d), group);
    p.heads = heads;
    return p;
}

namespace {

// Attention over already-projected matrices; returns heads concatenated (m×d).
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, MhaTrace* trace) {
    const std::size_t d = q.dim(1);
    const std::size_t dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = heads == 1 ? q : ops::slice(q, 1, h * dh, (h + 1) * dh);
        Tensor kh = heads == 1 ? k : ops::slice(k, 1, h * dh, (h + 1) * dh);
        Tensor vh = heads == 1 ? v : ops::slice(v, 1, h * dh, (h + 1) * dh);
        Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
        Tensor weights = ops::softmax_rows(scores);
        if (trace) trace->weights.push_back(weights);
        outs.push_back(ops::matmul(weights, vh));
    }
    return heads == 1 ? outs.front() : ops::concat(outs, 1);
}

void check_matrix(const char* what, const Tensor& x, std::size_t d) {
    if (x.rank() != 2 || x.dim(1) != d) {
        throw ShapeError(std::string("mha: ") + what + " has shape " + format_shape(x.shape()) +
                         ", expected (rows," + std::to_string(d) + ")");
    }
}

Tensor rows_of_frame(const Tensor& flat, std::size_t frame, std::size_t per_frame) {
    return ops::slice(flat, 0, frame * per_frame, (frame + 1) * per_frame);
}

}  // namespace

Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, const MhaParams& p, MhaTrace* trace) {
    const std::size_t d = p.width();
    check_matrix("query input", q_in, d);
    check_matrix("key input", k_in, d);
    check_matrix("value input", v_in, d);
    if (k_in.dim(0) != v_in.dim(0)) {
        throw ShapeError("mha: keys " + format_shape(k_in.shape()) + " and values " +
                         format_shape(v_in.shape()) + " differ in length");
    }
    Tensor q = ops::linear(q_in, p.w_q);
    Tensor k = ops::linear(k_in, p.w_k);
    Tensor v = ops::linear(v_in, p.w_v);
    return ops::linear(attend(q, k, v, p.heads, trace), p.w_o);
}

GateParams GateParams::create(std::size_t d, ParamStore& store, const std::string& prefix, ParamGroup group) {
    return {store.add(prefix + ".weight", Tensor::zeros({d, d}), group),
            store.add(prefix + ".bias", Tensor::zeros({d}), group)};
}

Tensor GateParams::apply(const Tensor& x) const { return ops::linear(x, weight, bias); }

FeedForwardParams FeedForwardParams::create(std::size_t d, Rng& rng, ParamStore& store, const std::string& prefix,
                                            ParamGroup group) {
    FeedForwardParams p;
    p.norm = LayerNormParams::create(d, store, prefix + ".norm", group);
    p.w1 = store.add(prefix + ".w1", rng.xavier_uniform(d, 4 * d), group);
    p.b1 = store.add(prefix + ".b1", Tensor::zeros({4 * d}), group);
    p.w2 = store.add(prefix + ".w2", rng.xavier_uniform(4 * d, d), group);
    p.b2 = store.add(prefix + ".b2", Tensor::zeros({d}), group);
    return p;
}

Tensor FeedForwardParams::apply(const Tensor& x) const {
    Tensor hidden = ops::gelu(ops::linear(norm.apply(x), w1, b1));
    return ops::add(x, ops::linear(hidden, w2, b2));
}

CrossAttentionParams CrossAttentionParams::create(std::size_t d, std::size_t heads, Rng& rng, ParamStore& store,
                                                  const std::string& prefix) {
    const auto group = ParamGroup::NewModules;
    CrossAttentionParams p;
    p.query_norm = LayerNormParams::create(d, store, prefix + ".query_norm", group);
    p.context_norm = LayerNormParams::create(d, store, prefix + ".context_norm", group);
    p.attn = MhaParams::create(d, heads, rng, store, prefix + ".attn", group);
    p.gate = GateParams::create(d, store, prefix + ".gate", group);
    return p;
}

std::string_view to_string(BlockVariant v) {
    switch (v) {
        case BlockVariant::A2V_V2A: return "A2V_V2A";
        case BlockVariant::A2V_only: return "A2V_only";
        case BlockVariant::Joint_AV: return "Joint_AV";
        case BlockVariant::video_only: return "video_only";
    }
    return "unknown";
}

BlockVariant block_variant_from_string(std::string_view name) {
    for (auto v : {BlockVariant::A2V_V2A, BlockVariant::A2V_only, BlockVariant::Joint_AV, BlockVariant::video_only}) {
        if (to_string(v) == name) return v;
    }
    throw std::invalid_argument("unknown block variant '" + std::string(name) + "'");
}

AvBlockParams AvBlockParams::create(BlockVariant variant, std::size_t d, std::size_t heads, Rng& rng,
                                    ParamStore& store, const std::string& prefix) {
    AvBlockParams p;
    p.spatial_norm = LayerNormParams::create(d, store, prefix + ".spatial_norm", ParamGroup::PretrainedSlow);
    p.spatial = MhaParams::create(d, heads, rng, store, prefix + ".spatial", ParamGroup::PretrainedSlow);
    if (variant == BlockVariant::A2V_V2A || variant == BlockVariant::A2V_only) {
        p.a2v = CrossAttentionParams::create(d, heads, rng, store, prefix + ".a2v");
    }
    if (variant == BlockVariant::A2V_V2A) {
        p.v2a = CrossAttentionParams::create(d, heads, rng, store, prefix + ".v2a");
    }
    p.ffn = FeedForwardParams::create(d, rng, store, prefix + ".ffn", ParamGroup::NewModules);
    return p;
}

bool AvBlockParams::supports(BlockVariant variant) const {
    switch (variant) {
        case BlockVariant::A2V_V2A: return a2v.has_value() && v2a.has_value();
        case BlockVariant::A2V_only: return a2v.has_value();
        case BlockVariant::Joint_AV:
        case BlockVariant::video_only: return true;
    }
    return false;
}

void BackboneConfig::validate() const {
    if (layers == 0) throw std::invalid_argument("backbone needs at least one layer");
    if (av_blocks > layers) {
        throw std::invalid_argument("av_blocks (" + std::to_string(av_blocks) + ") exceeds layers (" +
                                    std::to_string(layers) + ")");
    }
    if (heads == 0 || d % heads != 0) {
        throw std::invalid_argument("width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                                    " heads");
    }
    if (frames == 0 || patches == 0) throw std::invalid_argument("frames and patches must be positive");
}

BlockVariant BackboneConfig::layer_variant(std::size_t layer) const {
    return layer < av_blocks ? variant : BlockVariant::video_only;
}

BackboneParams BackboneParams::create(const BackboneConfig& cfg, Rng& rng, ParamStore& store) {
    cfg.validate();
    BackboneParams p;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        p.blocks.push_back(AvBlockParams::create(cfg.layer_variant(l), cfg.d, cfg.heads, rng, store,
                                                 "backbone.layer" + std::to_string(l)));
    }
    p.final_norm = LayerNormParams::create(cfg.d, store, "backbone.final_norm", ParamGroup::NewModules);
    return p;
}

TokenGrid spatial_attention(const TokenGrid& v_prev, const MhaParams& p, const LayerNormParams& norm,
                            std::vector<MhaTrace>* traces) {
    const std::size_t frames = v_prev.frames();
    const std::size_t per_frame = v_prev.tokens_per_frame();
    const std::size_t d = v_prev.width();
    if (d != p.width()) {
        throw ShapeError("spatial_attention: grid " + format_shape(v_prev.tokens.shape()) + " vs width " +
                         std::to_string(p.width()));
    }
    // Projections are row-wise, so they run over every frame at once; only the
    // score/mix step is restricted to a single frame.
    Tensor x = ops::reshape(norm.apply(v_prev.tokens), {frames * per_frame, d});
    Tensor q = ops::linear(x, p.w_q);
    Tensor k = ops::linear(x, p.w_k);
    Tensor v = ops::linear(x, p.w_v);
    std::vector<Tensor> per_frame_out;
    per_frame_out.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        MhaTrace trace;
        per_frame_out.push_back(attend(rows_of_frame(q, t, per_frame), rows_of_frame(k, t, per_frame),
                                       rows_of_frame(v, t, per_frame), p.heads, traces ? &trace : nullptr));
        if (traces) traces->push_back(std::move(trace));
    }
    Tensor mixed = ops::linear(frames == 1 ? per_frame_out.front() : ops::concat(per_frame_out, 0), p.w_o);
    return {ops::add(ops::reshape(mixed, v_prev.tokens.shape()), v_prev.tokens)};
}

TokenGrid a2v_attention(const TokenGrid& s, const AudioTrack& a_prev, const CrossAttentionParams& p,
                        std::vector<MhaTrace>* traces) {
    const std::size_t frames = s.frames();
    const std::size_t per_frame = s.tokens_per_frame();
    const std::size_t d = s.width();
    if (!a_prev.embeds.defined() || a_prev.embeds.rank() != 2 || a_prev.steps() != frames || a_prev.width() != d) {
        throw ShapeError("a2v_attention: audio " +
                         (a_prev.embeds.defined() ? format_shape(a_prev.embeds.shape()) : std::string("<none>")) +
                         " does not match grid " + format_shape(s.tokens.shape()));
    }
    Tensor queries = ops::reshape(p.query_norm.apply(s.tokens), {frames * per_frame, d});
    Tensor context = p.context_norm.apply(a_prev.embeds);
    std::vector<Tensor> outs;
    outs.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        MhaTrace trace;
        outs.push_back(mha(rows_of_frame(queries, t, per_frame), context, context, p.attn, traces ? &trace : nullptr));
        if (traces) traces->push_back(std::move(trace));
    }
    Tensor gated = p.gate.apply(frames == 1 ? outs.front() : ops::concat(outs, 0));
    return {ops::add(ops::reshape(gated, s.tokens.shape()), s.tokens)};
}

AudioTrack v2a_attention(const AudioTrack& a_prev, const TokenGrid& s, const CrossAttentionParams& p,
                         std::vector<MhaTrace>* traces) {
    const std::size_t frames = s.frames();
    const std::size_t per_frame = s.tokens_per_frame();
    const std::size_t d = s.width();
    if (!a_prev.embeds.defined() || a_prev.embeds.rank() != 2 || a_prev.steps() != frames || a_prev.width() != d) {
        throw ShapeError("v2a_attention: audio " +
                         (a_prev.embeds.defined() ? format_shape(a_prev.embeds.shape()) : std::string("<none>")) +
                         " does not match grid " + format_shape(s.tokens.shape()));
    }
    Tensor queries = p.query_norm.apply(a_prev.embeds);
    Tensor context = ops::reshape(p.context_norm.apply(s.tokens), {frames * per_frame, d});
    std::vector<Tensor> outs;
    outs.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        MhaTrace trace;
        Tensor ctx = rows_of_frame(context, t, per_frame);
        outs.push_back(mha(rows_of_frame(queries, t, 1), ctx, ctx, p.attn, traces ? &trace : nullptr));
        if (traces) traces->push_back(std::move(trace));
    }
    Tensor gated = p.gate.apply(frames == 1 ? outs.front() : ops::concat(outs, 0));
    return {ops::add(gated, a_prev.embeds)};
}

std::pair<TokenGrid, AudioTrack> av_block(const TokenGrid& v_prev, const AudioTrack& a_prev,
                                          const AvBlockParams& params, BlockVariant variant, BlockTrace* trace) {
    if (!params.supports(variant)) {
        throw std::invalid_argument("block parameters do not support variant " + std::string(to_string(variant)));
    }
    TokenGrid visual;
    AudioTrack audio = a_prev;
    switch (variant) {
        case BlockVariant::video_only:
            visual = spatial_attention(v_prev, params.spatial, params.spatial_norm, trace ? &trace->spatial : nullptr);
            break;
        case BlockVariant::A2V_only: {
            TokenGrid s = spatial_attention(v_prev, params.spatial, params.spatial_norm,
                                            trace ? &trace->spatial : nullptr);
            visual = a2v_attention(s, a_prev, *params.a2v, trace ? &trace->a2v : nullptr);
            break;
        }
        case BlockVariant::A2V_V2A: {
            TokenGrid s = spatial_attention(v_prev, params.spatial, params.spatial_norm,
                                            trace ? &trace->spatial : nullptr);
            visual = a2v_attention(s, a_prev, *params.a2v, trace ? &trace->a2v : nullptr);
            audio = v2a_attention(a_prev, s, *params.v2a, trace ? &trace->v2a : nullptr);
            break;
        }
        case BlockVariant::Joint_AV: {
            const std::size_t frames = v_prev.frames();
            const std::size_t per_frame = v_prev.tokens_per_frame();
            const std::size_t d = v_prev.width();
            if (!a_prev.embeds.defined() || a_prev.width() != d) {
                throw ShapeError("Joint_AV block needs audio of width " + std::to_string(d));
            }
            const std::size_t visual_rows = frames * per_frame;
            Tensor joint = ops::concat({ops::reshape(v_prev.tokens, {visual_rows, d}), a_prev.embeds}, 0);
            Tensor normed = params.spatial_norm.apply(joint);
            MhaTrace t;
            Tensor out = ops::add(mha(normed, normed, normed, params.spatial, trace ? &t : nullptr), joint);
            if (trace) trace->joint.push_back(std::move(t));
            visual = {ops::reshape(ops::slice(out, 0, 0, visual_rows), v_prev.tokens.shape())};
            audio = {ops::slice(out, 0, visual_rows, visual_rows + a_prev.steps())};
            break;
        }
    }
    visual.tokens = params.ffn.apply(visual.tokens);
    return {visual, audio};
}

BackboneOutput forward_video(const TokenGrid& v0, const AudioTrack& a0, const BackboneConfig& cfg,
                             const BackboneParams& params) {
    cfg.validate();
    if (params.blocks.size() != cfg.layers) {
        throw std::invalid_argument("backbone has " + std::to_string(params.blocks.size()) +
                                    " blocks but config asks for " + std::to_string(cfg.layers));
    }
    const Shape expected{cfg.frames, cfg.patches + 1, cfg.d};
    if (v0.tokens.shape() != expected) {
        throw ShapeError("forward_video: grid " + format_shape(v0.tokens.shape()) + ", config expects " +
                         format_shape(expected));
    }
    if (cfg.uses_audio()) {
        if (!a0.embeds.defined() || a0.embeds.shape() != Shape{cfg.frames, cfg.d}) {
            throw ShapeError("forward_video: audio " +
                             (a0.embeds.defined() ? format_shape(a0.embeds.shape()) : std::string("<none>")) +
                             ", config expects " + format_shape({cfg.frames, cfg.d}));
        }
    }
    TokenGrid visual = v0;
    AudioTrack audio = a0;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        std::tie(visual, audio) = av_block(visual, audio, params.blocks[l], cfg.layer_variant(l));
    }
    Tensor cls = ops::reshape(ops::slice(visual.tokens, 1, 0, 1), {cfg.frames, cfg.d});
    Tensor pooled = ops::mean_axis(cls, 0);
    return {params.final_norm.apply(pooled), visual, audio};
}

Tensor audio_patch_saliency(const AudioTrack& a_final, const TokenGrid& v_final) {
    const std::size_t frames = v_final.frames();
    const std::size_t per_frame = v_final.tokens_per_frame();
    const std::size_t d = v_final.width();
    if (a_final.embeds.shape() != Shape{frames, d}) {
        throw ShapeError("audio_patch_saliency: audio " + format_shape(a_final.embeds.shape()) + " vs grid " +
                         format_shape(v_final.tokens.shape()));
    }
    if (per_frame < 2) throw ShapeError("audio_patch_saliency: grid has no patch tokens");
    const std::size_t patches = per_frame - 1;
    Tensor patch_dirs = ops::l2_normalize(ops::slice(v_final.tokens, 1, 1, per_frame));
    Tensor audio_dirs = ops::l2_normalize(a_final.embeds);
    std::vector<double> out(frames * patches);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t n = 0; n < patches; ++n) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += patch_dirs[(t * patches + n) * d + j] * audio_dirs[t * d + j];
            out[t * patches + n] = std::clamp(dot, -1.0, 1.0);
        }
    }
    return Tensor::from({frames, patches}, std::move(out));
}

}  // namespace eclipse
