#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "eclipse/dataset.hpp"
#include "eclipse/ops.hpp"
#include "eclipse/training.hpp"
#include "gradcheck.hpp"

namespace eclipse {
namespace {

using testing::gradcheck;
using testing::max_abs_diff;

TEST(Similarity, HandCase) {
    const double r = 1.0 / std::sqrt(2.0);
    Tensor sim = similarity_matrix({Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2, 2}, {r, r, 0, 1})});
    EXPECT_NEAR(sim[0], 0.70710678118654752, 1e-15);
    EXPECT_NEAR(sim[1], 0.0, 1e-15);
    EXPECT_NEAR(sim[2], 0.70710678118654752, 1e-15);
    EXPECT_NEAR(sim[3], 1.0, 1e-15);
}

TEST(Similarity, OrthonormalPairsGiveIdentity) {
    Tensor f = Tensor::from({3, 3}, {0, 2, 0, 0, 0, -1, 5, 0, 0});
    Tensor g = Tensor::from({3, 3}, {0, 1, 0, 0, 0, -3, 1, 0, 0});
    Tensor sim = similarity_matrix({f, g});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(sim[i * 3 + j], i == j ? 1.0 : 0.0, 1e-15);
}

TEST(Similarity, SinglePairAndDegenerateRows) {
    Tensor sim = similarity_matrix({Tensor::from({1, 2}, {1, 1}), Tensor::from({1, 2}, {1, 0})});
    EXPECT_NEAR(sim.item(), 1.0 / std::sqrt(2.0), 1e-15);
    std::vector<std::size_t> degenerate;
    similarity_matrix({Tensor::from({2, 2}, {0, 0, 1, 0}), Tensor::from({2, 2}, {1, 0, 0, 0})}, &degenerate);
    EXPECT_EQ(degenerate, (std::vector<std::size_t>{0, 3}));
    EXPECT_THROW(similarity_matrix({Tensor::zeros({2, 2}), Tensor::zeros({3, 2})}), ShapeError);
}

TEST(ContrastiveLoss, SingleItemIsZero) {
    EXPECT_EQ(contrastive_loss(Tensor::from({1, 1}, {0.37}), Tensor::scalar(1.3)).item(), 0.0);
}

TEST(ContrastiveLoss, TwoByTwoHandCase) {
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    const double loss = contrastive_loss(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::scalar(0.0)).item();
    EXPECT_NEAR(loss, expected, 1e-15);
    EXPECT_NEAR(loss, 0.3133, 1e-4);
}

TEST(ContrastiveLoss, SaturatedScaleOnIdentityIsNearZero) {
    Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const double loss = contrastive_loss(eye, Tensor::scalar(50.0)).item();
    // the scale clamps at 100, so each softmax leaves 2e^-100 off the diagonal
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 1e-40);
}

TEST(ContrastiveLoss, NonNegativeAndJointPermutationInvariant) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor f = rng.normal_tensor({5, 4}, 1.0), g = rng.normal_tensor({5, 4}, 1.0);
        Tensor scale = Tensor::scalar(rng.uniform(0.0, 4.0));
        const double loss = contrastive_loss(similarity_matrix({f, g}), scale).item();
        EXPECT_GE(loss, 0.0);
        const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        const double joint = contrastive_loss(
            similarity_matrix({ops::index_select(f, 0, perm), ops::index_select(g, 0, perm)}), scale).item();
        EXPECT_LE(std::abs(loss - joint), 1e-12);
    }
}

TEST(ContrastiveLoss, OneSidedPermutationChangesLoss) {
    Rng rng(32);
    Tensor f = rng.normal_tensor({4, 3}, 1.0), g = rng.normal_tensor({4, 3}, 1.0);
    const std::vector<std::size_t> perm{1, 0, 2, 3};
    const double a = contrastive_loss(similarity_matrix({f, g}), Tensor::scalar(1.0)).item();
    const double b = contrastive_loss(similarity_matrix({ops::index_select(f, 0, perm), g}), Tensor::scalar(1.0)).item();
    EXPECT_GT(std::abs(a - b), 1e-6);
}

TEST(ContrastiveLoss, RejectsNonSquare) {
    EXPECT_THROW(contrastive_loss(Tensor::zeros({2, 3}), Tensor::scalar(0.0)), ShapeError);
}

TEST(ContrastiveLoss, GradientsMatchFiniteDifferences) {
    Rng rng(33);
    Tensor f = rng.normal_tensor({4, 5}, 1.0), g = rng.normal_tensor({4, 5}, 1.0);
    Tensor scale = Tensor::scalar(1.1);
    auto r = gradcheck([&] { return contrastive_loss(similarity_matrix({f, g}), scale); }, {f, g, scale});
    EXPECT_LE(r.max_rel_error, 1e-5) << "input " << r.worst_input;
}

TEST(ContrastiveLoss, ClampedScaleHasNoGradient) {
    Tensor scale = Tensor::scalar(6.0).set_requires_grad();
    GradientTape tape;
    {
        TapeScope s(tape);
        tape.backward(contrastive_loss(Tensor::from({2, 2}, {0.3, 0.1, -0.2, 0.5}), scale));
    }
    EXPECT_EQ(scale.grad()[0], 0.0);
}

// Scalar Adam reference, written out independently of the optimizer.
struct ScalarAdam {
    double m = 0, v = 0, lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t = 0;
    double step(double x, double g) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        return x - lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
};

double quadratic_step(Tensor& x, AdamOptimizer& opt) {
    GradientTape tape;
    {
        TapeScope s(tape);
        tape.backward(ops::sum_all(ops::mul(x, x)));
    }
    opt.step();
    return x[0];
}

TEST(Adam, FirstStepOnQuadraticMovesByLearningRate) {
    ParamStore store;
    Tensor x = store.add("x", Tensor::from({1}, {1.0}), ParamGroup::NewModules);
    AdamOptimizer opt(store, {.lr_slow = 0.0, .lr_new = 0.1});
    const double after = quadratic_step(x, opt);
    EXPECT_NEAR(after, 0.9, 1e-8);
    ScalarAdam ref{.lr = 0.1};
    double expected = ref.step(1.0, 2.0);
    EXPECT_EQ(after, expected);
    for (int i = 0; i < 5; ++i) {
        const double g = 2.0 * x[0];
        x.zero_grad();
        EXPECT_NEAR(quadratic_step(x, opt), expected = ref.step(expected, g), 1e-15);
    }
}

TEST(Adam, ZeroGradientOnlyDecaysSlowGroup) {
    ParamStore store;
    Tensor slow = store.add("slow", Tensor::from({2}, {2.0, -1.0}), ParamGroup::PretrainedSlow);
    Tensor fresh = store.add("new", Tensor::from({1}, {3.0}), ParamGroup::NewModules);
    AdamOptimizer opt(store, {.lr_slow = 0.1, .lr_new = 0.1, .weight_decay_slow = 0.2});
    opt.step();
    EXPECT_NEAR(slow[0], 2.0 * (1 - 0.1 * 0.2), 1e-15);
    EXPECT_NEAR(slow[1], -1.0 * (1 - 0.1 * 0.2), 1e-15);
    EXPECT_EQ(fresh[0], 3.0);
}

TEST(Adam, ZeroLearningRateGroupIsFrozen) {
    ParamStore store;
    Tensor slow = store.add("slow", Tensor::from({1}, {1.0}), ParamGroup::PretrainedSlow);
    Tensor fresh = store.add("new", Tensor::from({1}, {1.0}), ParamGroup::NewModules);
    AdamOptimizer opt(store, {.lr_slow = 0.0, .lr_new = 0.05});
    GradientTape tape;
    {
        TapeScope s(tape);
        tape.backward(ops::sum_all(ops::mul(slow, fresh)));
    }
    opt.step();
    EXPECT_EQ(slow[0], 1.0);
    EXPECT_LT(fresh[0], 1.0);
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
    ParamStore store;
    Tensor a = store.add("a", Tensor::from({1}, {1.0}), ParamGroup::NewModules);
    Tensor b = store.add("block.b", Tensor::from({1}, {1.0}), ParamGroup::NewModules);
    a.impl()->grad_buffer()[0] = 1.0;
    b.impl()->grad_buffer()[0] = NAN;
    AdamOptimizer opt(store, {});
    try {
        opt.step();
        FAIL() << "expected NonFiniteGradient";
    } catch (const NonFiniteGradient& e) {
        EXPECT_NE(std::string(e.what()).find("block.b"), std::string::npos);
    }
    EXPECT_EQ(a[0], 1.0);
    EXPECT_EQ(opt.step_count(), 0u);
    EXPECT_EQ(opt.first_moments()[0][0], 0.0);
}

// Model-level training behaviour on a small synthetic corpus.

SyntheticDatasetSpec small_spec(std::uint64_t seed) {
    SyntheticDatasetSpec s;
    s.num_clips = 40;
    s.seed = seed;
    return s;
}

ModelConfig small_model() {
    ModelConfig m;
    m.d = 16;
    m.heads = 2;
    return m;
}

TEST(ModelParams, GroupsPartitionTheModel) {
    EclipseModel model(small_model(), 1);
    std::size_t slow = 0;
    for (const auto& p : model.params().params()) {
        const bool text = p.name.starts_with("text.");
        const bool spatial = p.name.starts_with("backbone.") && (p.name.find(".spatial.") != std::string::npos ||
                                                                p.name.find(".spatial_norm.") != std::string::npos);
        EXPECT_EQ(p.group == ParamGroup::PretrainedSlow, text || spatial) << p.name;
        slow += p.group == ParamGroup::PretrainedSlow;
        EXPECT_TRUE(p.value.requires_grad()) << p.name;
    }
    EXPECT_GT(slow, 0u);
    EXPECT_LT(slow, model.params().size());
    EXPECT_NEAR(model.logit_scale().item(), std::log(1.0 / 0.07), 1e-15);
}

TEST(Training, FixedBatchLossDecreases) {
    const Dataset data = generate_synthetic(small_spec(5));
    std::vector<const Example*> batch;
    for (std::size_t i = 0; i < 8; ++i) batch.push_back(&data.examples[i]);
    for (std::uint64_t seed : {1, 2, 3}) {
        EclipseModel model(small_model(), seed);
        AdamOptimizer opt(model.params(), {.lr_slow = 1e-7, .lr_new = 1e-3});
        const double first = loss_and_gradients(model, batch, SamplingStrategy::Uniform, 0);
        opt.step();
        for (int step = 1; step < 50; ++step) {
            loss_and_gradients(model, batch, SamplingStrategy::Uniform, 0);
            opt.step();
        }
        const double last = loss_and_gradients(model, batch, SamplingStrategy::Uniform, 0);
        EXPECT_LT(last, first) << "seed " << seed;
    }
}

TEST(Training, ZeroStepsKeepsInitialization) {
    const Dataset data = generate_synthetic(small_spec(6));
    EclipseModel trained(small_model(), 9);
    EclipseModel fresh(small_model(), 9);
    TrainConfig cfg;
    cfg.steps = 0;
    const TrainResult r = train(trained, data, cfg, 4);
    EXPECT_TRUE(r.curve.empty());
    for (std::size_t i = 0; i < fresh.params().size(); ++i) {
        EXPECT_EQ(max_abs_diff(trained.params().params()[i].value, fresh.params().params()[i].value), 0.0);
    }
}

TEST(Training, DeterministicForFixedSeed) {
    const Dataset data = generate_synthetic(small_spec(7));
    TrainConfig cfg;
    cfg.steps = 6;
    cfg.batch_size = 4;
    cfg.eval_every = 3;
    cfg.sampling = SamplingStrategy::RandomSegment;
    cfg.adam.lr_new = 1e-3;
    auto run = [&] {
        EclipseModel model(small_model(), 2);
        return train(model, data, cfg, 11);
    };
    const TrainResult a = run(), b = run();
    ASSERT_EQ(a.curve.size(), 6u);
    ASSERT_EQ(a.evaluations.size(), 2u);
    for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].loss, b.curve[i].loss);
    EXPECT_EQ(to_json(a.evaluations.back().second), to_json(b.evaluations.back().second));
}

TEST(Training, NonFiniteForwardAborts) {
    const Dataset data = generate_synthetic(small_spec(8));
    EclipseModel model(small_model(), 3);
    for (auto& p : model.params().params())
        if (p.name == "video.patch_weight") p.value.mutable_data()[0] = INFINITY;
    TrainConfig cfg;
    cfg.steps = 2;
    try {
        train(model, data, cfg, 0);
        FAIL() << "expected TrainingAborted";
    } catch (const TrainingAborted& e) {
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    }
}

TEST(Training, LossCsvLayout) {
    std::ostringstream out;
    write_loss_csv(out, {{1, 0.5, 1e-7, 1e-4}});
    EXPECT_EQ(out.str(), "step,loss,lr_slow,lr_new\n1,0.5,9.9999999999999995e-08,0.0001\n");
}

TEST(Training, RejectsOversizedBatch) {
    const Dataset data = generate_synthetic(small_spec(9));
    EclipseModel model(small_model(), 3);
    TrainConfig cfg;
    cfg.batch_size = 100;
    EXPECT_THROW(train(model, data, cfg, 0), std::invalid_argument);
}

}  // namespace
}  // namespace eclipse
