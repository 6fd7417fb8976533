#include "eclipse/rng.hpp"

#include <cmath>

namespace eclipse {

Tensor Rng::normal_tensor(Shape shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.mutable_data()) v = normal(0.0, stddev);
    return t;
}

Tensor Rng::uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.mutable_data()) v = uniform(lo, hi);
    return t;
}

Tensor Rng::xavier_uniform(std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_tensor({fan_in, fan_out}, -bound, bound);
}

}  // namespace eclipse
