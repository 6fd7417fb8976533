#include "eclipse/costmodel.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

namespace eclipse {

void ArchConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("arch config: " + msg); };
    if (d == 0 || heads == 0 || d % heads != 0) fail("d must be a positive multiple of heads");
    if (patch == 0 || height % patch != 0 || width % patch != 0) fail("frame size not divisible by patch");
    if (av_blocks > layers) fail("av_blocks exceeds layers");
    if (uses_audio() && frames > 0 && audio_steps != frames) fail("cross-modal layers need one audio step per frame");
    if (audio.flops_per_spectrogram < 0 || audio.peak_activation_values < 0) fail("negative audio cost");
    if (text.include && (text.d == 0 || text.heads == 0 || text.d % text.heads != 0)) fail("bad text geometry");
}

ArchConfig ArchConfig::vit_b32(std::size_t frames, BlockVariant variant) {
    ArchConfig cfg;
    cfg.frames = frames;
    cfg.audio_steps = variant == BlockVariant::video_only ? 0 : frames;
    cfg.variant = variant;
    cfg.av_blocks = variant == BlockVariant::video_only ? 0 : cfg.layers;
    return cfg;
}

ArchConfig ArchConfig::from_model(const ModelConfig& m, std::size_t text_tokens) {
    ArchConfig cfg;
    cfg.d = m.d;
    cfg.heads = m.heads;
    cfg.layers = m.layers;
    cfg.av_blocks = m.av_blocks;
    cfg.variant = m.variant;
    cfg.frames = m.frames;
    cfg.patch = m.patch;
    cfg.height = m.height;
    cfg.width = m.width;
    const bool audio = m.backbone().uses_audio();
    cfg.audio_steps = audio ? m.frames : 0;
    cfg.audio.flops_per_spectrogram =
        2.0 * static_cast<double>(m.spect_channels * m.audio_hidden + m.audio_hidden * m.d);
    cfg.audio.peak_activation_values = static_cast<double>(m.spect_rows * m.spect_channels);
    cfg.text = {true, m.d, m.heads, m.text_layers, text_tokens + 1};
    return cfg;
}

double CostReport::total_macs() const {
    double sum = 0;
    for (const auto& [name, value] : components()) sum += value;
    return sum;
}

std::vector<std::pair<std::string, double>> CostReport::components() const {
    return {{"patch_embed", patch_embed}, {"spatial_qkvo", spatial_qkvo}, {"attention_mix", attention_mix},
            {"ffn", ffn},                 {"a2v", a2v},                   {"v2a", v2a},
            {"joint_qkvo", joint_qkvo},   {"audio_encoder", audio_encoder}, {"text_encoder", text_encoder}};
}

CostReport count_flops(const ArchConfig& cfg) {
    cfg.validate();
    const double d = static_cast<double>(cfg.d);
    const double h = static_cast<double>(cfg.heads);
    const double T = static_cast<double>(cfg.frames);
    const double n = static_cast<double>(cfg.patches());
    const double tok = n + 1.0;  // tokens per frame
    const double Ta = static_cast<double>(cfg.audio_steps);
    const double pdim = 3.0 * static_cast<double>(cfg.patch * cfg.patch);

    CostReport r;
    r.patch_embed = T * n * pdim * d;
    const double visual = T * tok * d;  // values in one token grid
    double peak = 0;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const BlockVariant v = l < cfg.av_blocks ? cfg.variant : BlockVariant::video_only;
        // input, norm, Q, K, V, mix, residual, FFN norm, output, plus the 4d hidden
        double live = 13.0 * visual;
        if (v == BlockVariant::Joint_AV) {
            const double L = T * tok + Ta;
            r.joint_qkvo += 4.0 * L * d * d;
            r.attention_mix += 2.0 * L * L * d;
            live = 13.0 * visual + 7.0 * Ta * d + h * L * L;
        } else {
            r.spatial_qkvo += T * 4.0 * tok * d * d;
            r.attention_mix += T * 2.0 * tok * tok * d;
            live += h * T * tok * tok;
        }
        r.ffn += T * 8.0 * tok * d * d;
        if (v == BlockVariant::A2V_only || v == BlockVariant::A2V_V2A) {
            // Q, O and gate on the frame; K, V of the whole audio track per frame.
            r.a2v += T * (3.0 * tok * d * d + 2.0 * Ta * d * d + 2.0 * tok * Ta * d);
            live += 4.0 * visual + 2.0 * T * Ta * d + h * T * tok * Ta;
        }
        if (v == BlockVariant::A2V_V2A) {
            const double steps = std::min(T, Ta);
            r.v2a += steps * (3.0 * d * d + 2.0 * tok * d * d + 2.0 * tok * d);
            live += 5.0 * Ta * d + 2.0 * steps * tok * d + h * steps * tok;
        }
        peak = std::max(peak, live);
    }
    if (cfg.uses_audio()) {
        r.audio_encoder = Ta * cfg.audio.flops_per_spectrogram / 2.0;
        peak = std::max(peak, Ta * cfg.audio.peak_activation_values);
    }
    if (cfg.text.include) {
        const double L = static_cast<double>(cfg.text.tokens);
        const double td = static_cast<double>(cfg.text.d);
        r.text_encoder = static_cast<double>(cfg.text.layers) * (12.0 * L * td * td + 2.0 * L * L * td);
    }
    r.peak_activation_values = peak;
    return r;
}

CostComparison compare(const ArchConfig& a, const ArchConfig& b) {
    CostComparison c{count_flops(a), count_flops(b)};
    c.flop_ratio = c.a.total_macs() / c.b.total_macs();
    c.memory_ratio = c.a.peak_activation_values / c.b.peak_activation_values;
    return c;
}

nlohmann::json to_json(const ArchConfig& c) {
    return {{"d", c.d},
            {"heads", c.heads},
            {"layers", c.layers},
            {"av_blocks", c.av_blocks},
            {"frames", c.frames},
            {"audio_steps", c.audio_steps},
            {"patch", c.patch},
            {"height", c.height},
            {"width", c.width},
            {"patches", c.patches()},
            {"variant", std::string(to_string(c.variant))},
            {"audio_gflops_per_spectrogram", c.audio.flops_per_spectrogram / 1e9},
            {"text_encoder_included", c.text.include}};
}

nlohmann::json to_json(const CostReport& r, std::size_t batch) {
    nlohmann::json components = nlohmann::json::object();
    for (const auto& [name, macs] : r.components()) components[name] = {{"macs", macs}, {"gflops", 2.0 * macs / 1e9}};
    return {{"convention", kFlopConvention},
            {"components", components},
            {"total_macs", r.total_macs()},
            {"total_gflops", r.total_gflops()},
            {"batch", batch},
            {"peak_activation_values", r.peak_activation_values},
            {"activation_memory_mb", r.memory_mb(batch)}};
}

nlohmann::json to_json(const CostComparison& c, std::size_t batch) {
    return {{"convention", kFlopConvention},
            {"a", to_json(c.a, batch)},
            {"b", to_json(c.b, batch)},
            {"flop_ratio", c.flop_ratio},
            {"memory_ratio", c.memory_ratio}};
}

namespace {

std::string row(const std::string& label, const std::string& a, const std::string& b = "",
                const std::string& c = "") {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %14s %14s %10s\n", label.c_str(), a.c_str(), b.c_str(), c.c_str());
    return buf;
}

std::string num(double v, const char* fmt = "%.3f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

std::string format_table(const CostReport& r, std::size_t batch) {
    std::ostringstream out;
    out << "# " << kFlopConvention << '\n';
    out << row("component", "GFLOPs");
    for (const auto& [name, macs] : r.components()) out << row(name, num(2.0 * macs / 1e9));
    out << row("total", num(r.total_gflops()));
    out << row("memory_mb", num(r.memory_mb(batch), "%.1f")) ;
    return out.str();
}

std::string format_table(const CostComparison& c, std::size_t batch) {
    std::ostringstream out;
    out << "# " << kFlopConvention << '\n';
    out << row("component", "a GFLOPs", "b GFLOPs", "a/b");
    const auto ca = c.a.components();
    const auto cb = c.b.components();
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const double ga = 2.0 * ca[i].second / 1e9, gb = 2.0 * cb[i].second / 1e9;
        out << row(ca[i].first, num(ga), num(gb), gb > 0 ? num(ga / gb) : "-");
    }
    out << row("total", num(c.a.total_gflops()), num(c.b.total_gflops()), num(c.flop_ratio));
    out << row("memory_mb", num(c.a.memory_mb(batch), "%.1f"), num(c.b.memory_mb(batch), "%.1f"),
               num(c.memory_ratio));
    return out.str();
}

}  // namespace eclipse
