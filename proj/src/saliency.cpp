#include "eclipse/saliency.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "eclipse/attention.hpp"
#include "eclipse/io.hpp"
#include "eclipse/ops.hpp"

namespace eclipse {

SaliencyMap compute_saliency(const EclipseModel& model, const Example& ex, SamplingStrategy sampling,
                             std::uint64_t seed) {
    const ModelConfig& cfg = model.config();
    if (!cfg.backbone().uses_audio()) {
        throw std::invalid_argument("saliency needs an audio stream; variant " + std::string(to_string(cfg.variant)) +
                                    " with " + std::to_string(cfg.av_blocks) + " audiovisual blocks has none");
    }
    const Shape& frames = ex.clip.frames.shape();
    if (frames.size() != 4 || frames[1] != cfg.height || frames[2] != cfg.width) {
        throw std::invalid_argument("clip " + format_shape(frames) + " does not match the checkpoint's " +
                                    std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + " frames");
    }
    const Shape& spect = ex.audio.spect.shape();
    if (spect.size() != 3 || spect[1] != cfg.spect_rows || spect[2] != cfg.spect_channels) {
        throw std::invalid_argument("spectrogram " + format_shape(spect) + " does not match the checkpoint");
    }
    SaliencyMap map;
    map.frame_indices = sample_frames(ex.clip.num_frames(), cfg.frames, sampling, seed);
    const SampledExample s = take_frames(ex, map.frame_indices);
    const BackboneOutput out = model.encode_video(s.clip, s.audio);
    const Tensor flat = audio_patch_saliency(out.audio, out.visual);
    map.values = ops::reshape(flat, {cfg.frames, cfg.height / cfg.patch, cfg.width / cfg.patch});
    return map;
}

void write_saliency_pgm(const SaliencyMap& map, const std::filesystem::path& path, std::size_t cell) {
    if (cell == 0) throw std::invalid_argument("saliency cell size must be positive");
    const std::size_t t_count = map.frames(), gh = map.grid_h(), gw = map.grid_w();
    const std::size_t img_w = t_count * gw * cell + (t_count - 1);
    const std::size_t img_h = gh * cell;
    std::vector<unsigned char> pixels(img_w * img_h, 0);
    for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t i = 0; i < gh; ++i)
            for (std::size_t j = 0; j < gw; ++j) {
                const double v = map.values[(t * gh + i) * gw + j];
                const auto level = static_cast<unsigned char>(std::lround((v + 1.0) / 2.0 * 255.0));
                const std::size_t x0 = t * (gw * cell + 1) + j * cell;
                for (std::size_t y = i * cell; y < (i + 1) * cell; ++y)
                    for (std::size_t x = x0; x < x0 + cell; ++x) pixels[y * img_w + x] = level;
            }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P5\n" << img_w << ' ' << img_h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

nlohmann::json to_json(const SaliencyMap& map) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t t = 0; t < map.frames(); ++t) {
        nlohmann::json grid = nlohmann::json::array();
        for (std::size_t i = 0; i < map.grid_h(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < map.grid_w(); ++j) row.push_back(map.values[(t * map.grid_h() + i) * map.grid_w() + j]);
            grid.push_back(std::move(row));
        }
        frames.push_back({{"frame_index", map.frame_indices.at(t)}, {"grid", std::move(grid)}});
    }
    return {{"grid_h", map.grid_h()}, {"grid_w", map.grid_w()}, {"frames", std::move(frames)}};
}

}  // namespace eclipse
