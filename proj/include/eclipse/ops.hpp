#pragma once

#include <cstddef>
#include <vector>

#include "eclipse/tensor.hpp"

// Differentiable operations over Tensor. Every op checks its output for NaN/Inf and
// records a backward closure on the active tape when any input requires a gradient.
namespace eclipse::ops {

// Elementwise with numpy-style broadcasting (shapes right-aligned; extents equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor divide(const Tensor& x, double divisor);
Tensor exp(const Tensor& x);
/// min(x, ceiling); the gradient is zero where the ceiling is active.
Tensor clamp_max(const Tensor& x, double ceiling);
Tensor gelu(const Tensor& x);

/// [m×k]·[k×n] → [m×n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Affine map over the last axis: x[...×din]·W[din×dout] (+ b[dout]). Pass an undefined
/// Tensor for no bias.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

/// Softmax over the last axis, stabilized by subtracting each row's maximum.
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
/// Normalizes each last-axis vector to zero mean / unit (biased) variance, then gain·x̂ + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

inline constexpr double kDegenerateNorm = 1e-12;
/// Scales each last-axis vector to unit L2 norm. Vectors with norm below 1e-12 pass through
/// unchanged; their row indices are appended to `degenerate_rows` when provided.
Tensor l2_normalize(const Tensor& x, std::vector<std::size_t>* degenerate_rows = nullptr);

/// Mean over one axis; the axis is removed (a rank-1 input yields shape (1)).
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices);

/// Row lookup: table[V×d], ids → [len(ids)×d].
Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids);

/// out[i] = x[i, cols[i]] for a 2-D x.
Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& cols);

}  // namespace eclipse::ops
