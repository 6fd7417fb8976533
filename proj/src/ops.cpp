#include "eclipse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace eclipse::ops {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (active_tape() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

bool tracking_all(const std::vector<Tensor>& inputs) {
    if (active_tape() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

Tensor make_output(const char* op, Shape shape, std::vector<double>&& values, bool track) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + " produced a non-finite value in output of shape " +
                               format_shape(shape));
        }
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = track;
    return Tensor(std::move(impl));
}

// Leading extents flattened into rows, last extent as columns.
struct RowView {
    std::size_t rows;
    std::size_t cols;
};

RowView rows_of(const Tensor& x) {
    const std::size_t cols = x.shape().back();
    return {x.numel() / cols, cols};
}

struct Broadcast {
    Shape out;
    std::vector<std::size_t> stride_a;
    std::vector<std::size_t> stride_b;
};

std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
    const std::size_t rank = out.size();
    std::vector<std::size_t> strides(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const std::size_t ax_in = in.size() - 1 - i;
        const std::size_t ax_out = rank - 1 - i;
        strides[ax_out] = in[ax_in] == 1 ? 0 : stride;
        stride *= in[ax_in];
    }
    return strides;
}

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
        const std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + format_shape(a) + " with " +
                             format_shape(b));
        }
        out[rank - 1 - i] = std::max(ea, eb);
    }
    return {out, aligned_strides(a, out), aligned_strides(b, out)};
}

// Calls f(out_offset, a_offset, b_offset) for every output element in row-major order.
template <class F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
    const std::size_t rank = bc.out.size();
    const std::size_t n = shape_numel(bc.out);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    for (std::size_t o = 0; o < n; ++o) {
        f(o, ia, ib);
        for (std::size_t k = rank; k-- > 0;) {
            ++idx[k];
            ia += bc.stride_a[k];
            ib += bc.stride_b[k];
            if (idx[k] < bc.out[k]) break;
            ia -= bc.stride_a[k] * bc.out[k];
            ib -= bc.stride_b[k] * bc.out[k];
            idx[k] = 0;
        }
    }
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const char* op, BinaryKind kind, const Tensor& a, const Tensor& b) {
    const bool track = tracking({&a, &b});
    const auto& da = a.impl()->data;
    const auto& db = b.impl()->data;
    auto apply = [kind](double x, double y) {
        switch (kind) {
            case BinaryKind::Add: return x + y;
            case BinaryKind::Sub: return x - y;
            case BinaryKind::Mul: return x * y;
        }
        return 0.0;
    };

    if (a.shape() == b.shape()) {
        std::vector<double> out(da.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(da[i], db[i]);
        Tensor y = make_output(op, a.shape(), std::move(out), track);
        if (track) {
            active_tape()->record([ai = a.impl(), bi = b.impl(), yi = y.impl(), kind] {
                if (yi->grad.empty()) return;
                const auto& g = yi->grad;
                if (ai->requires_grad) {
                    double* ga = ai->grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i)
                        ga[i] += kind == BinaryKind::Mul ? g[i] * bi->data[i] : g[i];
                }
                if (bi->requires_grad) {
                    double* gb = bi->grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        switch (kind) {
                            case BinaryKind::Add: gb[i] += g[i]; break;
                            case BinaryKind::Sub: gb[i] -= g[i]; break;
                            case BinaryKind::Mul: gb[i] += g[i] * ai->data[i]; break;
                        }
                    }
                }
            });
        }
        return y;
    }

    Broadcast bc = plan_broadcast(op, a.shape(), b.shape());
    std::vector<double> out(shape_numel(bc.out));
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        out[o] = apply(da[ia], db[ib]);
    });
    Tensor y = make_output(op, bc.out, std::move(out), track);
    if (track) {
        active_tape()->record([ai = a.impl(), bi = b.impl(), yi = y.impl(), kind, bc] {
            if (yi->grad.empty()) return;
            const auto& g = yi->grad;
            double* ga = ai->requires_grad ? ai->grad_buffer() : nullptr;
            double* gb = bi->requires_grad ? bi->grad_buffer() : nullptr;
            for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                if (ga) ga[ia] += kind == BinaryKind::Mul ? g[o] * bi->data[ib] : g[o];
                if (gb) {
                    switch (kind) {
                        case BinaryKind::Add: gb[ib] += g[o]; break;
                        case BinaryKind::Sub: gb[ib] -= g[o]; break;
                        case BinaryKind::Mul: gb[ib] += g[o] * ai->data[ia]; break;
                    }
                }
            });
        });
    }
    return y;
}

// Unary elementwise op given value and local derivative (as a function of input and output).
template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(dx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(dx[i]);
    Tensor y = make_output(op, x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), deriv] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            const auto& g = yi->grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xi->data[i], yi->data[i]);
        });
    }
    return y;
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         format_shape(x.shape()));
    }
}

void require_axis(const char* op, const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         format_shape(x.shape()));
    }
}

struct AxisSplit {
    std::size_t outer;
    std::size_t extent;
    std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::Mul, a, b); }

Tensor scale(const Tensor& x, double factor) {
    return unary("scale", x, [factor](double v) { return v * factor; },
                 [factor](double, double) { return factor; });
}

Tensor divide(const Tensor& x, double divisor) {
    if (divisor == 0.0) throw NumericError("divide: division by zero");
    return scale(x, 1.0 / divisor);
}

Tensor exp(const Tensor& x) {
    return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor clamp_max(const Tensor& x, double ceiling) {
    return unary("clamp_max", x, [ceiling](double v) { return std::min(v, ceiling); },
                 [ceiling](double v, double) { return v < ceiling ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary(
        "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [inv_sqrt_2pi](double v, double) {
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner extents differ, " + format_shape(a.shape()) + " x " +
                         format_shape(b.shape()));
    }
    const bool track = tracking({&a, &b});
    const double* pa = a.impl()->data.data();
    const double* pb = b.impl()->data.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
    }
    detail::add_macs(static_cast<std::uint64_t>(m) * k * n);
    Tensor y = make_output("matmul", {m, n}, std::move(out), track);
    if (track) {
        active_tape()->record([ai = a.impl(), bi = b.impl(), yi = y.impl(), m, k, n] {
            if (yi->grad.empty()) return;
            const double* g = yi->grad.data();
            if (ai->requires_grad) {
                double* ga = ai->grad_buffer();
                const double* pb = bi->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[p * n + j];
                        ga[i * k + p] += acc;
                    }
                }
            }
            if (bi->requires_grad) {
                double* gb = bi->grad_buffer();
                const double* pa = ai->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = pa[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor transpose(const Tensor& x) {
    require_rank("transpose", x, 2);
    const std::size_t m = x.dim(0), n = x.dim(1);
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = dx[i * n + j];
    Tensor y = make_output("transpose", {n, m}, std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), m, n] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += yi->grad[j * m + i];
        });
    }
    return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + format_shape(x.shape()) + " cannot become " + format_shape(shape));
    }
    const bool track = tracking({&x});
    std::vector<double> out = x.impl()->data;
    Tensor y = make_output("reshape", std::move(shape), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl()] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t i = 0; i < yi->grad.size(); ++i) gx[i] += yi->grad[i];
        });
    }
    return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank("linear weight", weight, 2);
    const std::size_t din = weight.dim(0), dout = weight.dim(1);
    if (x.rank() == 0 || x.shape().back() != din) {
        throw ShapeError("linear: input " + format_shape(x.shape()) + " does not match weight " +
                         format_shape(weight.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != dout)) {
        throw ShapeError("linear: bias " + format_shape(bias.shape()) + " does not match weight " +
                         format_shape(weight.shape()));
    }
    const std::size_t rows = x.numel() / din;
    const bool track = tracking({&x, &weight, &bias});
    const double* px = x.impl()->data.data();
    const double* pw = weight.impl()->data.data();
    std::vector<double> out(rows * dout, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = out.data() + r * dout;
        if (bias.defined()) std::copy_n(bias.impl()->data.data(), dout, row);
        for (std::size_t p = 0; p < din; ++p) {
            const double xp = px[r * din + p];
            const double* wrow = pw + p * dout;
            for (std::size_t j = 0; j < dout; ++j) row[j] += xp * wrow[j];
        }
    }
    detail::add_macs(static_cast<std::uint64_t>(rows) * din * dout);
    Shape shape = x.shape();
    shape.back() = dout;
    Tensor y = make_output("linear", std::move(shape), std::move(out), track);
    if (track) {
        ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        active_tape()->record([xi = x.impl(), wi = weight.impl(), bi, yi = y.impl(), rows, din, dout] {
            if (yi->grad.empty()) return;
            const double* g = yi->grad.data();
            if (xi->requires_grad) {
                double* gx = xi->grad_buffer();
                const double* pw = wi->data.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t p = 0; p < din; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < dout; ++j) acc += g[r * dout + j] * pw[p * dout + j];
                        gx[r * din + p] += acc;
                    }
                }
            }
            if (wi->requires_grad) {
                double* gw = wi->grad_buffer();
                const double* px = xi->data.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t p = 0; p < din; ++p) {
                        const double xp = px[r * din + p];
                        for (std::size_t j = 0; j < dout; ++j) gw[p * dout + j] += xp * g[r * dout + j];
                    }
                }
            }
            if (bi && bi->requires_grad) {
                double* gb = bi->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < dout; ++j) gb[j] += g[r * dout + j];
            }
        });
    }
    return y;
}

Tensor softmax_rows(const Tensor& x) {
    const auto [rows, cols] = rows_of(x);
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(dx.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = dx.data() + r * cols;
        double* o = out.data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (std::size_t j = 0; j < cols; ++j) o[j] /= total;
    }
    Tensor y = make_output("softmax_rows", x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), rows, cols] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = yi->data.data() + r * cols;
                const double* gr = yi->grad.data() + r * cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
                for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += yr[j] * (gr[j] - dot);
            }
        });
    }
    return y;
}

Tensor log_softmax_rows(const Tensor& x) {
    const auto [rows, cols] = rows_of(x);
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(dx.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = dx.data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += std::exp(in[j] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = in[j] - lse;
    }
    Tensor y = make_output("log_softmax_rows", x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), rows, cols] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = yi->data.data() + r * cols;
                const double* gr = yi->grad.data() + r * cols;
                double total = 0.0;
                for (std::size_t j = 0; j < cols; ++j) total += gr[j];
                for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += gr[j] - std::exp(yr[j]) * total;
            }
        });
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const auto [rows, d] = rows_of(x);
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
        throw ShapeError("layer_norm: input " + format_shape(x.shape()) + " with gain " +
                         format_shape(gain.shape()) + " and bias " + format_shape(bias.shape()));
    }
    const bool track = tracking({&x, &gain, &bias});
    const auto& dx = x.impl()->data;
    const auto& g = gain.impl()->data;
    const auto& b = bias.impl()->data;
    std::vector<double> out(dx.size());
    std::vector<double> xhat(dx.size());
    std::vector<double> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = dx.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += in[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (in[j] - mean) * rstd[r];
            out[r * d + j] = xhat[r * d + j] * g[j] + b[j];
        }
    }
    Tensor y = make_output("layer_norm", x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), gi = gain.impl(), bi = bias.impl(), yi = y.impl(),
                               xhat = std::move(xhat), rstd = std::move(rstd), rows, d] {
            if (yi->grad.empty()) return;
            const double* gy = yi->grad.data();
            if (gi->requires_grad) {
                double* gg = gi->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) gg[j] += gy[r * d + j] * xhat[r * d + j];
            }
            if (bi->requires_grad) {
                double* gb = bi->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += gy[r * d + j];
            }
            if (xi->requires_grad) {
                double* gx = xi->grad_buffer();
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dxhat = 0.0;
                    double mean_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = gy[r * d + j] * gi->data[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[r * d + j];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = gy[r * d + j] * gi->data[j];
                        gx[r * d + j] += rstd[r] * (dxh - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
                    }
                }
            }
        });
    }
    return y;
}

Tensor l2_normalize(const Tensor& x, std::vector<std::size_t>* degenerate_rows) {
    const auto [rows, d] = rows_of(x);
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(dx.size());
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += dx[r * d + j] * dx[r * d + j];
        const double norm = std::sqrt(sq);
        const bool degenerate = norm < kDegenerateNorm;
        norms[r] = degenerate ? 0.0 : norm;
        if (degenerate && degenerate_rows) degenerate_rows->push_back(r);
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = degenerate ? dx[r * d + j] : dx[r * d + j] / norm;
    }
    Tensor y = make_output("l2_normalize", x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), norms = std::move(norms), rows, d] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* gr = yi->grad.data() + r * d;
                if (norms[r] == 0.0) {
                    for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += gr[j];
                    continue;
                }
                const double* yr = yi->data.data() + r * d;
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += yr[j] * gr[j];
                for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += (gr[j] - yr[j] * dot) / norms[r];
            }
        });
    }
    return y;
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
    require_axis("mean_axis", x, axis);
    const AxisSplit s = split_at(x.shape(), axis);
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(s.outer * s.inner, 0.0);
    const double inv = 1.0 / static_cast<double>(s.extent);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
            for (std::size_t i = 0; i < s.inner; ++i)
                out[o * s.inner + i] += dx[(o * s.extent + e) * s.inner + i];
    for (double& v : out) v *= inv;
    Shape shape = x.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (shape.empty()) shape = {1};
    Tensor y = make_output("mean_axis", std::move(shape), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), s, inv] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t e = 0; e < s.extent; ++e)
                    for (std::size_t i = 0; i < s.inner; ++i)
                        gx[(o * s.extent + e) * s.inner + i] += yi->grad[o * s.inner + i] * inv;
        });
    }
    return y;
}

Tensor sum_all(const Tensor& x) {
    const bool track = tracking({&x});
    double total = 0.0;
    for (double v : x.data()) total += v;
    Tensor y = make_output("sum_all", {1}, {total}, track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl()] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += yi->grad[0];
        });
    }
    return y;
}

Tensor mean_all(const Tensor& x) { return divide(sum_all(x), static_cast<double>(x.numel())); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    require_axis("concat", parts[0], axis);
    Shape shape = parts[0].shape();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        Shape probe = p.shape();
        if (probe.size() != shape.size()) {
            throw ShapeError("concat: rank mismatch " + format_shape(shape) + " vs " + format_shape(probe));
        }
        probe[axis] = shape[axis];
        if (probe != shape) {
            throw ShapeError("concat: extents differ off axis " + std::to_string(axis) + ": " +
                             format_shape(parts[0].shape()) + " vs " + format_shape(p.shape()));
        }
        total += p.dim(axis);
    }
    shape[axis] = total;
    const AxisSplit s = split_at(shape, axis);
    const bool track = tracking_all(parts);
    std::vector<double> out(shape_numel(shape));
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const Tensor& p : parts) {
        const std::size_t ext = p.dim(axis);
        const auto& dp = p.impl()->data;
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(dp.data() + o * ext * s.inner, ext * s.inner,
                        out.data() + (o * s.extent + offset) * s.inner);
        offsets.push_back(offset);
        offset += ext;
    }
    Tensor y = make_output("concat", std::move(shape), std::move(out), track);
    if (track) {
        std::vector<ImplPtr> impls;
        for (const Tensor& p : parts) impls.push_back(p.impl());
        active_tape()->record([impls = std::move(impls), offsets = std::move(offsets), yi = y.impl(), s, axis] {
            if (yi->grad.empty()) return;
            for (std::size_t k = 0; k < impls.size(); ++k) {
                if (!impls[k]->requires_grad) continue;
                const std::size_t ext = impls[k]->shape[axis];
                double* gp = impls[k]->grad_buffer();
                for (std::size_t o = 0; o < s.outer; ++o) {
                    const double* src = yi->grad.data() + (o * s.extent + offsets[k]) * s.inner;
                    double* dst = gp + o * ext * s.inner;
                    for (std::size_t i = 0; i < ext * s.inner; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return y;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    require_axis("slice", x, axis);
    if (begin >= end || end > x.dim(axis)) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " + format_shape(x.shape()));
    }
    const AxisSplit s = split_at(x.shape(), axis);
    const std::size_t ext = end - begin;
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(s.outer * ext * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(dx.data() + (o * s.extent + begin) * s.inner, ext * s.inner, out.data() + o * ext * s.inner);
    Shape shape = x.shape();
    shape[axis] = ext;
    Tensor y = make_output("slice", std::move(shape), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), s, begin, ext] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t o = 0; o < s.outer; ++o) {
                const double* src = yi->grad.data() + o * ext * s.inner;
                double* dst = gx + (o * s.extent + begin) * s.inner;
                for (std::size_t i = 0; i < ext * s.inner; ++i) dst[i] += src[i];
            }
        });
    }
    return y;
}

Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices) {
    require_axis("index_select", x, axis);
    if (indices.empty()) throw ShapeError("index_select: empty index list");
    const AxisSplit s = split_at(x.shape(), axis);
    for (std::size_t idx : indices) {
        if (idx >= s.extent) {
            throw ShapeError("index_select: index " + std::to_string(idx) + " out of range for " +
                             format_shape(x.shape()));
        }
    }
    const std::size_t ext = indices.size();
    const bool track = tracking({&x});
    const auto& dx = x.impl()->data;
    std::vector<double> out(s.outer * ext * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < ext; ++e)
            std::copy_n(dx.data() + (o * s.extent + indices[e]) * s.inner, s.inner,
                        out.data() + (o * ext + e) * s.inner);
    Shape shape = x.shape();
    shape[axis] = ext;
    Tensor y = make_output("index_select", std::move(shape), std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), s, indices, ext] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t e = 0; e < ext; ++e)
                    for (std::size_t i = 0; i < s.inner; ++i)
                        gx[(o * s.extent + indices[e]) * s.inner + i] += yi->grad[(o * ext + e) * s.inner + i];
        });
    }
    return y;
}

Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids) {
    require_rank("embedding", table, 2);
    for (std::size_t id : ids) {
        if (id >= table.dim(0)) {
            throw ShapeError("embedding: id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(table.dim(0)));
        }
    }
    return index_select(table, 0, ids);
}

Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& cols) {
    require_rank("gather_cols", x, 2);
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (cols.size() != m) {
        throw ShapeError("gather_cols: " + std::to_string(cols.size()) + " columns for " + format_shape(x.shape()));
    }
    for (std::size_t c : cols) {
        if (c >= n) throw ShapeError("gather_cols: column " + std::to_string(c) + " out of range for " + format_shape(x.shape()));
    }
    const bool track = tracking({&x});
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = x.impl()->data[i * n + cols[i]];
    Tensor y = make_output("gather_cols", {m}, std::move(out), track);
    if (track) {
        active_tape()->record([xi = x.impl(), yi = y.impl(), cols, n] {
            if (yi->grad.empty()) return;
            double* gx = xi->grad_buffer();
            for (std::size_t i = 0; i < cols.size(); ++i) gx[i * n + cols[i]] += yi->grad[i];
        });
    }
    return y;
}

}  // namespace eclipse::ops
