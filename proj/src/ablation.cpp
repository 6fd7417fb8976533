#include "eclipse/ablation.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "eclipse/config.hpp"

namespace eclipse {

double AblationRow::mean_r1() const {
    if (r1.empty()) return 0.0;
    return std::accumulate(r1.begin(), r1.end(), 0.0) / static_cast<double>(r1.size());
}

double AblationRow::min_r1() const { return r1.empty() ? 0.0 : *std::ranges::min_element(r1); }
double AblationRow::max_r1() const { return r1.empty() ? 0.0 : *std::ranges::max_element(r1); }

AblationRow run_ablation_setting(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                                 const std::vector<std::uint64_t>& seeds, std::string factor) {
    if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
    AblationRow row{std::move(factor), model.variant, model.av_blocks, train.sampling, seeds, {}};
    for (std::uint64_t seed : seeds) {
        EclipseModel m(model, derive_seed(seed, "init"));
        TrainConfig cfg = train;
        cfg.eval_every = 0;
        const TrainResult result = eclipse::train(m, data, cfg, derive_seed(seed, "train"));
        if (result.evaluations.empty()) throw std::invalid_argument("ablation run produced no evaluation");
        row.r1.push_back(result.evaluations.back().second.r1);
    }
    return row;
}

std::vector<AblationRow> run_ablation_blocks(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                                             const std::vector<std::uint64_t>& seeds,
                                             const std::vector<BlockVariant>& variants) {
    std::vector<AblationRow> rows;
    for (BlockVariant v : variants) {
        ModelConfig cfg = base;
        cfg.variant = v;
        rows.push_back(run_ablation_setting(data, cfg, train, seeds, "variant"));
    }
    return rows;
}

std::vector<AblationRow> run_ablation_av_blocks(const Dataset& data, const ModelConfig& base,
                                                const TrainConfig& train, const std::vector<std::uint64_t>& seeds) {
    std::vector<std::size_t> ks{0, base.layers / 2, base.layers};
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::vector<AblationRow> rows;
    for (std::size_t k : ks) {
        ModelConfig cfg = base;
        cfg.av_blocks = k;
        rows.push_back(run_ablation_setting(data, cfg, train, seeds, "av_blocks"));
    }
    return rows;
}

std::vector<AblationRow> run_ablation_sampling(const Dataset& data, const ModelConfig& base,
                                               const TrainConfig& train, const std::vector<std::uint64_t>& seeds) {
    std::vector<AblationRow> rows;
    for (SamplingStrategy s : {SamplingStrategy::Uniform, SamplingStrategy::RandomSegment}) {
        TrainConfig cfg = train;
        cfg.sampling = s;
        rows.push_back(run_ablation_setting(data, base, cfg, seeds, "sampling"));
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "factor,variant,av_blocks,sampling,seeds,mean_r1,min_r1,max_r1,range_r1\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << r.factor << ',' << to_string(r.variant) << ',' << r.av_blocks << ',' << to_string(r.sampling) << ','
            << r.seeds.size() << ',' << r.mean_r1() << ',' << r.min_r1() << ',' << r.max_r1() << ','
            << (r.max_r1() - r.min_r1()) << '\n';
    }
}

}  // namespace eclipse
