#include "eclipse/metrics.hpp"

#include <stdexcept>
#include <string>

namespace eclipse {

RetrievalResult rank_metrics(const Tensor& sim, const std::vector<std::size_t>& truth) {
    if (sim.rank() != 2) throw ShapeError("rank_metrics: similarity must be 2-D, got " + format_shape(sim.shape()));
    const std::size_t queries = sim.dim(0), gallery = sim.dim(1);
    if (truth.size() != queries) {
        throw ShapeError("rank_metrics: " + std::to_string(truth.size()) + " truth entries for " +
                         std::to_string(queries) + " queries");
    }
    RetrievalResult result;
    result.ranks.resize(queries);
    double rank_sum = 0.0;
    for (std::size_t q = 0; q < queries; ++q) {
        const std::size_t target = truth[q];
        if (target >= gallery) {
            throw std::out_of_range("rank_metrics: truth index " + std::to_string(target) + " for query " +
                                    std::to_string(q) + " outside gallery of " + std::to_string(gallery));
        }
        const double score = sim[q * gallery + target];
        std::size_t rank = 1;
        for (std::size_t j = 0; j < gallery; ++j) {
            const double s = sim[q * gallery + j];
            if (s > score || (s == score && j < target)) ++rank;
        }
        result.ranks[q] = rank;
        rank_sum += static_cast<double>(rank);
    }
    result.r1 = recall_at(result.ranks, 1);
    result.r5 = recall_at(result.ranks, 5);
    result.r10 = recall_at(result.ranks, 10);
    result.mean_rank = rank_sum / static_cast<double>(queries);
    return result;
}

double recall_at(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (auto r : ranks) hits += r <= k ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

nlohmann::json to_json(const RetrievalResult& r) {
    return {{"R@1", r.r1}, {"R@5", r.r5}, {"R@10", r.r10}, {"MnR", r.mean_rank}, {"ranks", r.ranks}};
}

}  // namespace eclipse
