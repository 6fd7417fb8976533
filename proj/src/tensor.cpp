#include "eclipse/tensor.hpp"

#include <sstream>

namespace eclipse {

namespace {
thread_local GradientTape* g_active_tape = nullptr;
thread_local std::uint64_t g_mac_total = 0;
}  // namespace

std::string format_shape(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + format_shape(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + format_shape(shape));
    }
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("shape " + format_shape(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + format_shape(shape()));
    return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
}

std::vector<double> Tensor::grad() const {
    if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
    return impl_->grad;
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

void GradientTape::record(std::function<void()> backward_fn) {
    entries_.push_back(std::move(backward_fn));
}

void GradientTape::backward(const Tensor& root) {
    if (root.numel() != 1) {
        throw ShapeError("backward() needs a single-valued root, got " + format_shape(root.shape()));
    }
    root.impl()->grad_buffer()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(GradientTape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

GradientTape* active_tape() noexcept { return g_active_tape; }

MacCounter::MacCounter() : start_(g_mac_total) {}
std::uint64_t MacCounter::count() const { return g_mac_total - start_; }

namespace detail {
void add_macs(std::uint64_t n) noexcept { g_mac_total += n; }
std::uint64_t mac_total() noexcept { return g_mac_total; }
}  // namespace detail

}  // namespace eclipse
