#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "eclipse/attention.hpp"
#include "eclipse/embeddings.hpp"
#include "eclipse/params.hpp"

namespace eclipse {

struct ModelConfig {
    std::size_t d = 32;
    std::size_t heads = 4;
    std::size_t layers = 2;     // F
    std::size_t av_blocks = 2;  // k
    BlockVariant variant = BlockVariant::A2V_V2A;
    std::size_t frames = 4;  // T
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t patch = 4;
    std::size_t spect_rows = 8;      // M
    std::size_t spect_channels = 8;  // C
    std::size_t audio_hidden = 32;
    std::size_t vocab = 24;
    std::size_t max_text_tokens = 64;
    std::size_t text_layers = 1;
    double logit_scale_init = 2.659260036932778;  // ln(1/0.07)

    std::size_t patches() const { return (height / patch) * (width / patch); }
    BackboneConfig backbone() const;
    void validate() const;
};

/// Video tower (patch embedding, audio encoder, audiovisual backbone), text tower, and the
/// learnable logit scale, all registered in one ParamStore.
class EclipseModel {
public:
    EclipseModel(const ModelConfig& config, std::uint64_t seed);
    EclipseModel(const EclipseModel&) = delete;
    EclipseModel& operator=(const EclipseModel&) = delete;

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const Tensor& logit_scale() const { return logit_scale_; }
    const VideoEmbedParams& video_embed() const { return video_; }
    const BackboneParams& backbone() const { return backbone_; }
    const TextEncoderParams& text_encoder() const { return text_; }
    const ToyAudioEncoder& audio_encoder() const { return audio_; }

    /// Inputs hold exactly config().frames sampled frames / spectrograms.
    BackboneOutput encode_video(const VideoClip& clip, const AudioSpectrogram& audio) const;
    Tensor encode_text(const TextSequence& text) const;

private:
    ModelConfig config_;
    ParamStore store_;
    VideoEmbedParams video_;
    ToyAudioEncoder audio_;
    BackboneParams backbone_;
    TextEncoderParams text_;
    Tensor logit_scale_;
};

}  // namespace eclipse
