#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "eclipse/ops.hpp"
#include "eclipse/rng.hpp"
#include "gradcheck.hpp"

namespace eclipse {
namespace {

using testing::gradcheck;
using testing::project;

constexpr double kGradTol = 1e-4;

TEST(Matmul, HandCase) {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
    Tensor c = ops::matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{2, 2}));
    EXPECT_EQ(c[0], 19);
    EXPECT_EQ(c[1], 22);
    EXPECT_EQ(c[2], 43);
    EXPECT_EQ(c[3], 50);
}

TEST(Matmul, RejectsMismatchedInnerExtent) {
    Tensor a = Tensor::zeros({2, 3});
    try {
        ops::matmul(a, a);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("(2,3)"), std::string::npos) << e.what();
    }
}

TEST(Matmul, CountsMultiplyAdds) {
    MacCounter counter;
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({3, 4}));
    EXPECT_EQ(counter.count(), 24u);
    ops::linear(Tensor::zeros({5, 3}), Tensor::zeros({3, 2}), Tensor::zeros({2}));
    EXPECT_EQ(counter.count(), 24u + 30u);
}

TEST(Broadcast, AddsTrailingVector) {
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3}, {10, 20, 30});
    Tensor y = ops::add(x, b);
    const std::vector<double> expected{11, 22, 33, 14, 25, 36};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y[i], expected[i]);
    EXPECT_THROW(ops::add(x, Tensor::zeros({2})), ShapeError);
}

TEST(Softmax, MatchesDirectExponentials) {
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, -1, 0, 5});
    Tensor y = ops::softmax_rows(x);
    for (std::size_t r = 0; r < 2; ++r) {
        double z = 0;
        for (std::size_t c = 0; c < 3; ++c) z += std::exp(x[r * 3 + c]);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y[r * 3 + c], std::exp(x[r * 3 + c]) / z, 1e-15);
    }
}

TEST(Softmax, RowsSumToOneAndIgnoreRowShift) {
    Rng rng(3);
    Tensor x = rng.normal_tensor({6, 9}, 4.0);
    Tensor shifted = ops::add(x, Tensor::from({6, 1}, {100, -50, 3, 0, 7e2, -1e3}));
    Tensor a = ops::softmax_rows(x);
    Tensor b = ops::softmax_rows(shifted);
    for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 9; ++c) sum += a[r * 9 + c];
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    EXPECT_LE(testing::max_abs_diff(a, b), 1e-12);
}

TEST(Softmax, LargeLogitsStayFinite) {
    Tensor y = ops::softmax_rows(Tensor::from({1, 2}, {1000, 0}));
    EXPECT_EQ(y[0], 1.0);
    EXPECT_EQ(y[1], 0.0);
}

TEST(LayerNorm, HandCase) {
    Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
    Tensor y = ops::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}));
    const double denom = std::sqrt(1.25 + 1e-5);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], (static_cast<double>(i + 1) - 2.5) / denom, 1e-14);
}

TEST(LayerNorm, AppliesGainAndBias) {
    Tensor x = Tensor::from({1, 2}, {0, 2});
    Tensor y = ops::layer_norm(x, Tensor::from({2}, {2, 3}), Tensor::from({2}, {1, -1}));
    const double unit = 1.0 / std::sqrt(1.0 + 1e-5);
    EXPECT_NEAR(y[0], 1 - 2 * unit, 1e-14);
    EXPECT_NEAR(y[1], -1 + 3 * unit, 1e-14);
}

TEST(Linear, HandCase) {
    Tensor x = Tensor::from({1, 2}, {1, 2});
    Tensor w = Tensor::from({2, 3}, {1, 0, -1, 2, 1, 0});
    Tensor b = Tensor::from({3}, {0.5, 0, 0});
    Tensor y = ops::linear(x, w, b);
    EXPECT_EQ(y.shape(), (Shape{1, 3}));
    EXPECT_EQ(y[0], 5.5);
    EXPECT_EQ(y[1], 2);
    EXPECT_EQ(y[2], -1);
}

TEST(L2Normalize, UnitRowsAndDegenerateReport) {
    Tensor x = Tensor::from({2, 2}, {3, 4, 0, 0});
    std::vector<std::size_t> degenerate;
    Tensor y = ops::l2_normalize(x, &degenerate);
    EXPECT_DOUBLE_EQ(y[0], 0.6);
    EXPECT_DOUBLE_EQ(y[1], 0.8);
    EXPECT_EQ(y[2], 0.0);
    EXPECT_EQ(degenerate, std::vector<std::size_t>{1});
}

TEST(Gelu, ExactErfForm) {
    Tensor y = ops::gelu(Tensor::from({3}, {-1, 0, 2}));
    EXPECT_NEAR(y[0], -0.5 * (1 + std::erf(-1 / std::sqrt(2.0))), 1e-15);
    EXPECT_EQ(y[1], 0.0);
    EXPECT_NEAR(y[2], 1.0 * (1 + std::erf(2 / std::sqrt(2.0))), 1e-15);
}

TEST(NumericGuard, OverflowRaises) {
    EXPECT_THROW(ops::exp(Tensor::from({1}, {1000})), NumericError);
    EXPECT_THROW(ops::divide(Tensor::from({1}, {1}), 0.0), NumericError);
}

TEST(Tape, SharedInputAccumulatesGradient) {
    // y = x·x + 3x at x = 2 → dy/dx = 2x + 3 = 7
    Tensor x = Tensor::from({1}, {2.0}).set_requires_grad();
    GradientTape tape;
    {
        TapeScope scope(tape);
        Tensor y = ops::add(ops::mul(x, x), ops::scale(x, 3.0));
        tape.backward(ops::sum_all(y));
    }
    EXPECT_EQ(x.grad()[0], 7.0);
}

TEST(Tape, RecordsNothingWithoutScope) {
    Tensor x = Tensor::from({1}, {2.0}).set_requires_grad();
    GradientTape tape;
    ops::mul(x, x);
    EXPECT_TRUE(tape.empty());
    EXPECT_EQ(active_tape(), nullptr);
}

TEST(Tape, ScopesNestAndRestore) {
    GradientTape outer, inner;
    TapeScope a(outer);
    {
        TapeScope b(inner);
        EXPECT_EQ(active_tape(), &inner);
    }
    EXPECT_EQ(active_tape(), &outer);
}

TEST(Tensor, CloneIsIndependent) {
    Tensor a = Tensor::from({2}, {1, 2});
    Tensor b = a;
    Tensor c = a.clone();
    a.mutable_data()[0] = 9;
    EXPECT_EQ(b[0], 9);
    EXPECT_EQ(c[0], 1);
    EXPECT_TRUE(a.same_storage(b));
    EXPECT_FALSE(a.same_storage(c));
}

TEST(Shapes, SliceConcatIndexSelect) {
    Tensor x = Tensor::from({3, 2}, {0, 1, 2, 3, 4, 5});
    Tensor s = ops::slice(x, 0, 1, 3);
    EXPECT_EQ(s.shape(), (Shape{2, 2}));
    EXPECT_EQ(s[0], 2);
    Tensor c = ops::concat({x, s}, 0);
    EXPECT_EQ(c.shape(), (Shape{5, 2}));
    EXPECT_EQ(c[9], 5);
    Tensor i = ops::index_select(x, 0, {2, 0});
    EXPECT_EQ(i[0], 4);
    EXPECT_EQ(i[3], 1);
    EXPECT_THROW(ops::slice(x, 0, 2, 4), ShapeError);
    EXPECT_THROW(ops::reshape(x, {4, 2}), ShapeError);
}

// Finite-difference checks, one per differentiable operation.

class OpGradients : public ::testing::Test {
protected:
    Rng rng{17};
    Tensor a = rng.normal_tensor({3, 4}, 1.0);
    Tensor b = rng.normal_tensor({3, 4}, 1.0);
    Tensor row = rng.normal_tensor({4}, 1.0);
};

TEST_F(OpGradients, Elementwise) {
    EXPECT_LE(gradcheck([&] { return project(ops::add(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::sub(a, row)); }, {a, row}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::mul(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::mul(a, row)); }, {a, row}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::scale(a, -2.5)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::divide(a, 3.0)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::exp(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::gelu(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::clamp_max(a, 0.3)); }, {a}).max_rel_error, kGradTol);
}

TEST_F(OpGradients, MatrixProducts) {
    Tensor w = rng.normal_tensor({4, 5}, 1.0);
    Tensor bias = rng.normal_tensor({5}, 1.0);
    EXPECT_LE(gradcheck([&] { return project(ops::matmul(a, w)); }, {a, w}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::linear(a, w, bias)); }, {a, w, bias}).max_rel_error, kGradTol);
    Tensor batched = rng.normal_tensor({2, 3, 4}, 1.0);
    EXPECT_LE(gradcheck([&] { return project(ops::linear(batched, w, bias)); }, {batched, w, bias}).max_rel_error,
              kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::transpose(a)); }, {a}).max_rel_error, kGradTol);
}

TEST_F(OpGradients, Normalizations) {
    Tensor gain = rng.normal_tensor({4}, 1.0);
    EXPECT_LE(gradcheck([&] { return project(ops::softmax_rows(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::log_softmax_rows(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::layer_norm(a, gain, row)); }, {a, gain, row}).max_rel_error,
              kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::l2_normalize(a)); }, {a}).max_rel_error, kGradTol);
}

TEST_F(OpGradients, Reductions) {
    EXPECT_LE(gradcheck([&] { return ops::sum_all(ops::mul(a, a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return ops::mean_all(ops::mul(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::mean_axis(a, 0)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::mean_axis(a, 1)); }, {a}).max_rel_error, kGradTol);
}

TEST_F(OpGradients, Restructuring) {
    EXPECT_LE(gradcheck([&] { return project(ops::reshape(a, {2, 6})); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::concat({a, b}, 0)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::concat({a, b}, 1)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::slice(a, 1, 1, 3)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::index_select(a, 0, {2, 0, 2})); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::embedding(a, {1, 1, 0})); }, {a}).max_rel_error, kGradTol);
    EXPECT_LE(gradcheck([&] { return project(ops::gather_cols(a, {3, 0, 2})); }, {a}).max_rel_error, kGradTol);
}

}  // namespace
}  // namespace eclipse
