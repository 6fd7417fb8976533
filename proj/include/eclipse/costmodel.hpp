#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eclipse/attention.hpp"
#include "eclipse/model.hpp"

namespace eclipse {

/// Fixed cost of the audio encoder per spectrogram, independent of the toy encoder.
struct AudioCostDescriptor {
    double flops_per_spectrogram = 1.8e9;  // ResNet-18 scale on a 10 s spectrogram
    double peak_activation_values = 802816.0;  // largest live feature map per spectrogram (64×112×112)
};

struct TextCostDescriptor {
    bool include = false;
    std::size_t d = 512;
    std::size_t heads = 8;
    std::size_t layers = 12;
    std::size_t tokens = 77;  // including the summary token
};

/// Geometry of one inference pass. Cross-modal layers align audio step t with frame t.
struct ArchConfig {
    std::size_t d = 768;
    std::size_t heads = 12;
    std::size_t layers = 12;     // F
    std::size_t av_blocks = 12;  // k
    std::size_t frames = 32;     // T_video
    std::size_t audio_steps = 32;  // T_audio
    std::size_t patch = 32;
    std::size_t height = 224;
    std::size_t width = 224;
    BlockVariant variant = BlockVariant::A2V_V2A;
    AudioCostDescriptor audio;
    TextCostDescriptor text;

    std::size_t patches() const { return patch == 0 ? 0 : (height / patch) * (width / patch); }
    bool uses_audio() const { return av_blocks > 0 && variant != BlockVariant::video_only; }
    void validate() const;

    /// CLIP ViT-B/32 visual geometry with T frames.
    static ArchConfig vit_b32(std::size_t frames, BlockVariant variant);
    /// The executable model: toy audio encoder and its text encoder counted exactly.
    static ArchConfig from_model(const ModelConfig& cfg, std::size_t text_tokens);
};

/// Multiply-adds per component; FLOPs are 2× these.
struct CostReport {
    double patch_embed = 0;
    double spatial_qkvo = 0;
    double attention_mix = 0;  // spatial and joint scores + weighted sums
    double ffn = 0;
    double a2v = 0;  // projections, scores, mix, gate
    double v2a = 0;
    double joint_qkvo = 0;
    double audio_encoder = 0;
    double text_encoder = 0;
    double peak_activation_values = 0;  // per batch item

    double total_macs() const;
    double total_gflops() const { return 2.0 * total_macs() / 1e9; }
    double memory_mb(std::size_t batch) const { return peak_activation_values * batch * 4.0 / 1e6; }
    std::vector<std::pair<std::string, double>> components() const;
};

inline constexpr const char* kFlopConvention =
    "1 FLOP = 2 x multiply-add of dense matrix products; softmax, layer norm and GELU not counted";

CostReport count_flops(const ArchConfig& cfg);

struct CostComparison {
    CostReport a;
    CostReport b;
    double flop_ratio = 0;    // a / b
    double memory_ratio = 0;  // a / b
};

CostComparison compare(const ArchConfig& a, const ArchConfig& b);

nlohmann::json to_json(const ArchConfig& cfg);
nlohmann::json to_json(const CostReport& r, std::size_t batch);
nlohmann::json to_json(const CostComparison& c, std::size_t batch);
std::string format_table(const CostReport& r, std::size_t batch);
std::string format_table(const CostComparison& c, std::size_t batch);

}  // namespace eclipse
