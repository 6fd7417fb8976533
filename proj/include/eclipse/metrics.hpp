#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "eclipse/tensor.hpp"

namespace eclipse {

struct RetrievalResult {
    double r1 = 0.0;  // percent
    double r5 = 0.0;
    double r10 = 0.0;
    double mean_rank = 0.0;  // 1-indexed
    std::vector<std::size_t> ranks;
};

/// Ranks each query's true gallery item in sim (Q×G, higher is better). Items scoring
/// strictly higher rank ahead; equal scores are ordered by gallery index.
RetrievalResult rank_metrics(const Tensor& sim, const std::vector<std::size_t>& truth);

double recall_at(const std::vector<std::size_t>& ranks, std::size_t k);

nlohmann::json to_json(const RetrievalResult& r);

}  // namespace eclipse
