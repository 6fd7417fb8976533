#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eclipse {

using Shape = std::vector<std::size_t>;

std::string format_shape(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when operand extents are incompatible. The message carries every shape involved.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a gradient flows in
    bool requires_grad = false;

    double* grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad.data();
    }
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient.
///
/// Tensor is a shared handle: copies alias the same storage, which is what lets the
/// tape route gradients back into parameters. Use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    double item() const;
    double operator[](std::size_t flat) const { return impl_->data[flat]; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool on = true);

    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient values; all zeros when nothing has flowed in yet.
    std::vector<double> grad() const;
    void zero_grad() { impl_->grad.clear(); }

    Tensor clone() const;
    Tensor detach() const { return clone(); }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of differentiable operations executed while the tape is active.
///
/// Entries are appended in execution order, which is a topological order of the
/// computation graph; backward() walks them in reverse, visiting each exactly once.
class GradientTape {
public:
    void record(std::function<void()> backward_fn);
    /// Seeds d(root)/d(root) = 1 and propagates; root must hold a single value.
    void backward(const Tensor& root);
    void reset() { entries_.clear(); }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::vector<std::function<void()>> entries_;
};

/// Makes a tape the recording target for the current thread until destroyed.
class TapeScope {
public:
    explicit TapeScope(GradientTape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradientTape* previous_;
};

GradientTape* active_tape() noexcept;

/// Counts multiply-accumulates executed by matrix products on this thread while alive.
class MacCounter {
public:
    MacCounter();
    std::uint64_t count() const;

private:
    std::uint64_t start_;
};

namespace detail {
void add_macs(std::uint64_t n) noexcept;
std::uint64_t mac_total() noexcept;
}  // namespace detail

}  // namespace eclipse
