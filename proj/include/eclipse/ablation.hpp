#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eclipse/dataset.hpp"
#include "eclipse/model.hpp"
#include "eclipse/training.hpp"

namespace eclipse {

/// One configuration trained once per seed; R@1 is validation text-to-video.
struct AblationRow {
    std::string factor;  // "variant", "av_blocks", or "sampling"
    BlockVariant variant = BlockVariant::A2V_V2A;
    std::size_t av_blocks = 0;
    SamplingStrategy sampling = SamplingStrategy::Uniform;
    std::vector<std::uint64_t> seeds;
    std::vector<double> r1;

    double mean_r1() const;
    double min_r1() const;
    double max_r1() const;
};

/// Trains `model` settings on `data` for every seed. Seed s initializes the model from
/// derive_seed(s, "init") and drives batching from derive_seed(s, "train").
AblationRow run_ablation_setting(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                                 const std::vector<std::uint64_t>& seeds, std::string factor);

std::vector<AblationRow> run_ablation_blocks(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                                             const std::vector<std::uint64_t>& seeds,
                                             const std::vector<BlockVariant>& variants = {
                                                 BlockVariant::video_only, BlockVariant::Joint_AV,
                                                 BlockVariant::A2V_only, BlockVariant::A2V_V2A});

/// Rows for k ∈ {0, F/2, F} with the base variant.
std::vector<AblationRow> run_ablation_av_blocks(const Dataset& data, const ModelConfig& base,
                                                const TrainConfig& train, const std::vector<std::uint64_t>& seeds);

/// Training-time frame sampling sweep; evaluation always samples uniformly.
std::vector<AblationRow> run_ablation_sampling(const Dataset& data, const ModelConfig& base,
                                               const TrainConfig& train, const std::vector<std::uint64_t>& seeds);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace eclipse
