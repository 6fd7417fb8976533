#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eclipse/params.hpp"
#include "eclipse/rng.hpp"
#include "eclipse/types.hpp"

namespace eclipse {

struct LayerNormParams {
    Tensor gain;
    Tensor bias;

    static LayerNormParams create(std::size_t d, ParamStore& store, const std::string& name, ParamGroup group);
    Tensor apply(const Tensor& x) const;
};

/// Projections for one multi-head attention: W_Q, W_K, W_V, W_O are d×d, no biases.
struct MhaParams {
    Tensor w_q;
    Tensor w_k;
    Tensor w_v;
    Tensor w_o;
    std::size_t heads = 1;

    static MhaParams create(std::size_t d, std::size_t heads, Rng& rng, ParamStore& store,
                            const std::string& prefix, ParamGroup group);
    std::size_t width() const { return w_q.dim(0); }
};

/// Per-head attention weights captured during a forward pass (each m×n).
struct MhaTrace {
    std::vector<Tensor> weights;
};

/// Multi-head attention: per-head Softmax(QKᵀ/√(d/h))·V, heads concatenated, then W_O.
/// q_in is m×d; k_in and v_in are n×d.
Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, const MhaParams& p,
           MhaTrace* trace = nullptr);

/// d×d linear with bias, zero at initialization so a gated branch starts as the identity.
struct GateParams {
    Tensor weight;
    Tensor bias;

    static GateParams create(std::size_t d, ParamStore& store, const std::string& prefix, ParamGroup group);
    Tensor apply(const Tensor& x) const;
};

/// Pre-norm position-wise MLP d→4d→d (GELU); apply() includes the residual.
struct FeedForwardParams {
    LayerNormParams norm;
    Tensor w1;
    Tensor b1;
    Tensor w2;
    Tensor b2;

    static FeedForwardParams create(std::size_t d, Rng& rng, ParamStore& store, const std::string& prefix,
                                    ParamGroup group);
    Tensor apply(const Tensor& x) const;
};

/// One cross-modal pathway: query norm, context norm, attention, and the zero-init gate.
struct CrossAttentionParams {
    LayerNormParams query_norm;
    LayerNormParams context_norm;
    MhaParams attn;
    GateParams gate;

    static CrossAttentionParams create(std::size_t d, std::size_t heads, Rng& rng, ParamStore& store,
                                       const std::string& prefix);
};

enum class BlockVariant { A2V_V2A, A2V_only, Joint_AV, video_only };

std::string_view to_string(BlockVariant v);
BlockVariant block_variant_from_string(std::string_view name);

struct AvBlockParams {
    LayerNormParams spatial_norm;
    MhaParams spatial;
    std::optional<CrossAttentionParams> a2v;
    std::optional<CrossAttentionParams> v2a;
    FeedForwardParams ffn;

    /// Allocates what `variant` needs; spatial attention and the FFN always exist.
    static AvBlockParams create(BlockVariant variant, std::size_t d, std::size_t heads, Rng& rng,
                                ParamStore& store, const std::string& prefix);
    bool supports(BlockVariant variant) const;
};

struct BackboneConfig {
    std::size_t layers = 12;     // F
    std::size_t av_blocks = 12;  // k: the first k layers run `variant`, the rest video_only
    std::size_t d = 32;
    std::size_t heads = 4;
    std::size_t frames = 4;   // T
    std::size_t patches = 9;  // N
    BlockVariant variant = BlockVariant::A2V_V2A;

    void validate() const;
    BlockVariant layer_variant(std::size_t layer) const;
    bool uses_audio() const { return av_blocks > 0 && variant != BlockVariant::video_only; }
};

struct BackboneParams {
    std::vector<AvBlockParams> blocks;
    LayerNormParams final_norm;

    static BackboneParams create(const BackboneConfig& cfg, Rng& rng, ParamStore& store);
};

/// Per-frame pre-norm self-attention: S_t = mha(LN(V_t)) + V_t.
TokenGrid spatial_attention(const TokenGrid& v_prev, const MhaParams& p, const LayerNormParams& norm,
                            std::vector<MhaTrace>* traces = nullptr);

/// Audio-to-video: every frame's tokens attend over all T audio embeddings, gated, plus S.
TokenGrid a2v_attention(const TokenGrid& s, const AudioTrack& a_prev, const CrossAttentionParams& p,
                        std::vector<MhaTrace>* traces = nullptr);

/// Video-to-audio: audio row t attends over frame t's tokens, gated, plus A_t.
AudioTrack v2a_attention(const AudioTrack& a_prev, const TokenGrid& s, const CrossAttentionParams& p,
                         std::vector<MhaTrace>* traces = nullptr);

/// All attention weights produced by one block, in call order.
struct BlockTrace {
    std::vector<MhaTrace> spatial;
    std::vector<MhaTrace> a2v;
    std::vector<MhaTrace> v2a;
    std::vector<MhaTrace> joint;
};

/// One audiovisual layer. A2V and V2A both read the same S and the previous A.
std::pair<TokenGrid, AudioTrack> av_block(const TokenGrid& v_prev, const AudioTrack& a_prev,
                                          const AvBlockParams& params, BlockVariant variant,
                                          BlockTrace* trace = nullptr);

struct BackboneOutput {
    Tensor embedding;  // f, shape (d)
    TokenGrid visual;  // final-layer V
    AudioTrack audio;  // final-layer A
};

/// Runs all F layers, mean-pools the per-frame CLS tokens and applies the final norm.
BackboneOutput forward_video(const TokenGrid& v0, const AudioTrack& a0, const BackboneConfig& cfg,
                             const BackboneParams& params);

/// Cosine similarity between A_t and every non-CLS token of frame t: T×N in [-1,1].
Tensor audio_patch_saliency(const AudioTrack& a_final, const TokenGrid& v_final);

}  // namespace eclipse
