#include "eclipse/model.hpp"

#include <stdexcept>
#include <string>

namespace eclipse {

BackboneConfig ModelConfig::backbone() const {
    BackboneConfig cfg;
    cfg.layers = layers;
    cfg.av_blocks = av_blocks;
    cfg.d = d;
    cfg.heads = heads;
    cfg.frames = frames;
    cfg.patches = patches();
    cfg.variant = variant;
    return cfg;
}

void ModelConfig::validate() const {
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
        throw std::invalid_argument("frame " + std::to_string(height) + "x" + std::to_string(width) +
                                    " is not divisible by patch size " + std::to_string(patch));
    }
    if (vocab == 0 || max_text_tokens == 0) throw std::invalid_argument("vocab and max_text_tokens must be positive");
    if (spect_rows == 0 || spect_channels == 0 || audio_hidden == 0) {
        throw std::invalid_argument("spectrogram extents and audio_hidden must be positive");
    }
    backbone().validate();
}

EclipseModel::EclipseModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    video_ = VideoEmbedParams::create(config_.patch, config_.patches(), config_.frames, config_.d, rng, store_);
    if (config_.backbone().uses_audio()) {
        audio_ = ToyAudioEncoder(config_.spect_channels, config_.audio_hidden, config_.d, rng, store_);
    }
    backbone_ = BackboneParams::create(config_.backbone(), rng, store_);
    text_ = TextEncoderParams::create(config_.vocab, config_.max_text_tokens, config_.d, config_.heads,
                                      config_.text_layers, rng, store_);
    logit_scale_ = store_.add("logit_scale", Tensor::scalar(config_.logit_scale_init), ParamGroup::NewModules);
    store_.audit();
}

BackboneOutput EclipseModel::encode_video(const VideoClip& clip, const AudioSpectrogram& audio) const {
    TokenGrid v0 = embed_video(patchify(clip, config_.patch), video_);
    AudioTrack a0;
    if (config_.backbone().uses_audio()) a0 = encode_audio(audio, audio_, config_.d);
    return forward_video(v0, a0, config_.backbone(), backbone_);
}

Tensor EclipseModel::encode_text(const TextSequence& text) const { return eclipse::encode_text(text, text_); }

}  // namespace eclipse
