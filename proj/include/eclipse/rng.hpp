#pragma once

#include <cstdint>
#include <random>

#include "eclipse/tensor.hpp"

namespace eclipse {

/// Seeded generator shared by every stochastic component. Same seed, same stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    /// Uniform integer in [lo, hi].
    std::size_t uniform_int(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
    }
    std::uint64_t next() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

    Tensor normal_tensor(Shape shape, double stddev);
    Tensor uniform_tensor(Shape shape, double lo, double hi);
    /// Glorot/Xavier uniform for a [fan_in × fan_out] weight.
    Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out);

private:
    std::mt19937_64 engine_;
};

}  // namespace eclipse
