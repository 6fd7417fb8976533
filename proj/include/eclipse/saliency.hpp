#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "eclipse/dataset.hpp"
#include "eclipse/model.hpp"

namespace eclipse {

/// Audio-to-patch cosine similarity laid out on the patch grid: T×(H/P)×(W/P) in [-1,1].
struct SaliencyMap {
    Tensor values;
    std::vector<std::size_t> frame_indices;

    std::size_t frames() const { return values.dim(0); }
    std::size_t grid_h() const { return values.dim(1); }
    std::size_t grid_w() const { return values.dim(2); }
};

/// Requires a model whose final layer carries an audio stream and an example matching its geometry.
SaliencyMap compute_saliency(const EclipseModel& model, const Example& ex, SamplingStrategy sampling,
                             std::uint64_t seed);

/// Binary PGM: frames left to right, each cell `cell` pixels square, one-pixel gaps;
/// gray level (v+1)/2·255.
void write_saliency_pgm(const SaliencyMap& map, const std::filesystem::path& path, std::size_t cell = 8);

nlohmann::json to_json(const SaliencyMap& map);

}  // namespace eclipse
