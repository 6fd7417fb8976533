// Acceptance suite: one PASS/FAIL line per criterion. Run with a criterion name, or no
// argument for all of them. Exit status is non-zero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eclipse/ablation.hpp"
#include "eclipse/cli.hpp"
#include "eclipse/config.hpp"
#include "eclipse/costmodel.hpp"
#include "eclipse/dataset.hpp"
#include "eclipse/metrics.hpp"
#include "eclipse/ops.hpp"
#include "eclipse/training.hpp"
#include "gradcheck.hpp"
#include "temp_dir.hpp"

namespace eclipse {
namespace {

using testing::gradcheck;
using testing::max_abs_diff;
using testing::project;

// Tolerances and budgets, fixed here and nowhere else.
constexpr double kZeroInitTol = 1e-10;
constexpr double kZeroInitSeconds = 30;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120;
constexpr double kRowSumTol = 1e-12;
constexpr double kPermutationTol = 1e-10;
constexpr double kCrossFrameTol = 1e-12;
constexpr double kLossHandValue = 0.3133;
constexpr double kLossHandTol = 1e-4;
constexpr double kLossPermutationTol = 1e-12;
constexpr double kLossOracleTol = 1e-12;
constexpr double kAblationMargin = 10.0;  // R@1 points
constexpr double kAblationSeconds = 600;
constexpr double kCostCalibration = 0.20;
constexpr double kCostInstrumentedTol = 0.02;
constexpr double kCostSeconds = 10;
constexpr double kReferenceEclipseGflops = 827;
constexpr double kReferenceVideoGflops = 1251;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void open_gates(BackboneParams& params, Rng& rng) {
    for (auto& b : params.blocks)
        for (auto* cross : {b.a2v ? &*b.a2v : nullptr, b.v2a ? &*b.v2a : nullptr})
            if (cross)
                for (Tensor t : {cross->gate.weight, cross->gate.bias})
                    for (double& v : t.mutable_data()) v = rng.normal(0.0, 0.5);
}

Outcome zero_init() {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(1000 + trial);
        ParamStore store;
        BackboneConfig cfg{.layers = 3, .av_blocks = 3, .d = 32, .heads = 4, .frames = 4, .patches = 9,
                           .variant = BlockVariant::A2V_V2A};
        BackboneParams params = BackboneParams::create(cfg, rng, store);
        TokenGrid v0{rng.normal_tensor({4, 10, 32}, 1.0)};
        AudioTrack a0{rng.normal_tensor({4, 32}, 1.0)};
        BackboneConfig video = cfg;
        video.variant = BlockVariant::video_only;
        const Tensor av = forward_video(v0, a0, cfg, params).embedding;
        const Tensor vo = forward_video(v0, {}, video, params).embedding;
        worst = std::max(worst, max_abs_diff(av, vo));
    }
    return {worst <= kZeroInitTol, fmt("max |f_av - f_video| = %.3g over 100 inputs (tol %.0e)", worst, kZeroInitTol)};
}

Outcome gradients() {
    Rng rng(7);
    std::vector<std::pair<std::string, double>> errors;
    auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> in) {
        errors.emplace_back(name, gradcheck(f, std::move(in)).max_rel_error);
    };
    Tensor a = rng.normal_tensor({3, 4}, 1.0), b = rng.normal_tensor({3, 4}, 1.0);
    Tensor row = rng.normal_tensor({4}, 1.0), w = rng.normal_tensor({4, 5}, 1.0), bias = rng.normal_tensor({5}, 1.0);
    check("add", [&] { return project(ops::add(a, row)); }, {a, row});
    check("sub", [&] { return project(ops::sub(a, b)); }, {a, b});
    check("mul", [&] { return project(ops::mul(a, b)); }, {a, b});
    check("scale", [&] { return project(ops::scale(a, 1.7)); }, {a});
    check("divide", [&] { return project(ops::divide(a, 1.7)); }, {a});
    check("exp", [&] { return project(ops::exp(a)); }, {a});
    check("clamp_max", [&] { return project(ops::clamp_max(a, 0.25)); }, {a});
    check("gelu", [&] { return project(ops::gelu(a)); }, {a});
    check("matmul", [&] { return project(ops::matmul(a, w)); }, {a, w});
    check("transpose", [&] { return project(ops::transpose(a)); }, {a});
    check("reshape", [&] { return project(ops::reshape(a, {6, 2})); }, {a});
    check("linear", [&] { return project(ops::linear(a, w, bias)); }, {a, w, bias});
    check("softmax_rows", [&] { return project(ops::softmax_rows(a)); }, {a});
    check("log_softmax_rows", [&] { return project(ops::log_softmax_rows(a)); }, {a});
    Tensor gain = rng.normal_tensor({4}, 1.0);
    check("layer_norm", [&] { return project(ops::layer_norm(a, gain, row)); }, {a, gain, row});
    check("l2_normalize", [&] { return project(ops::l2_normalize(a)); }, {a});
    check("mean_axis", [&] { return project(ops::mean_axis(a, 1)); }, {a});
    check("sum_all", [&] { return ops::sum_all(ops::mul(a, a)); }, {a});
    check("mean_all", [&] { return ops::mean_all(ops::mul(a, b)); }, {a, b});
    check("concat", [&] { return project(ops::concat({a, b}, 1)); }, {a, b});
    check("slice", [&] { return project(ops::slice(a, 0, 1, 3)); }, {a});
    check("index_select", [&] { return project(ops::index_select(a, 0, {2, 2, 0})); }, {a});
    check("embedding", [&] { return project(ops::embedding(a, {1, 0, 1})); }, {a});
    check("gather_cols", [&] { return project(ops::gather_cols(a, {3, 1, 0})); }, {a});

    // End to end: contrastive loss of a two-clip batch through every parameter.
    ModelConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.av_blocks = 2;
    cfg.frames = 2;
    cfg.height = 2;
    cfg.width = 6;
    cfg.patch = 2;  // N = 3
    cfg.spect_rows = 3;
    cfg.spect_channels = 4;
    cfg.audio_hidden = 6;
    cfg.vocab = 6;
    cfg.max_text_tokens = 4;
    for (auto variant : {BlockVariant::A2V_V2A, BlockVariant::A2V_only, BlockVariant::Joint_AV, BlockVariant::video_only}) {
        cfg.variant = variant;
        EclipseModel model(cfg, 3);
        auto& backbone = const_cast<BackboneParams&>(model.backbone());
        open_gates(backbone, rng);
        std::vector<VideoClip> clips;
        std::vector<AudioSpectrogram> spects;
        for (int i = 0; i < 2; ++i) {
            clips.push_back({rng.uniform_tensor({2, 2, 6, 3}, 0.0, 1.0), {}, ""});
            spects.push_back({rng.normal_tensor({2, 3, 4}, 1.0)});
        }
        const std::vector<TextSequence> texts{{{0, 3, 5}}, {{2, 2}}};
        std::vector<Tensor> inputs;
        for (const auto& p : model.params().params()) inputs.push_back(p.value);
        auto loss = [&] {
            std::vector<Tensor> f, g;
            for (int i = 0; i < 2; ++i) {
                f.push_back(ops::reshape(model.encode_video(clips[i], spects[i]).embedding, {1, 8}));
                g.push_back(ops::reshape(model.encode_text(texts[i]), {1, 8}));
            }
            return contrastive_loss(similarity_matrix({ops::concat(f, 0), ops::concat(g, 0)}), model.logit_scale());
        };
        const auto r = gradcheck(loss, inputs);
        errors.emplace_back("model/" + std::string(to_string(variant)) + "/" +
                                model.params().params()[r.worst_input].name,
                            r.max_rel_error);
    }
    auto worst = std::ranges::max_element(errors, {}, &std::pair<std::string, double>::second);
    const bool ok = std::ranges::all_of(errors, [](const auto& e) { return e.second <= kGradTol; });
    return {ok, fmt("%zu checks, worst rel. err %.3g at %s (tol %.0e)", errors.size(), worst->second,
                    worst->first.c_str(), kGradTol)};
}

Outcome attention_algebra() {
    Rng rng(11);
    ParamStore store;
    const std::size_t T = 3, tok = 5, d = 8;
    AvBlockParams block = AvBlockParams::create(BlockVariant::A2V_V2A, d, 2, rng, store, "b");
    for (auto* cross : {&*block.a2v, &*block.v2a})
        for (double& v : cross->gate.weight.mutable_data()) v = rng.normal(0.0, 0.5);
    TokenGrid grid{rng.normal_tensor({T, tok, d}, 1.0)};
    AudioTrack audio{rng.normal_tensor({T, d}, 1.0)};

    double row_err = 0.0;
    std::size_t matrices = 0;
    for (auto variant : {BlockVariant::A2V_V2A, BlockVariant::Joint_AV}) {
        BlockTrace trace;
        av_block(grid, audio, block, variant, &trace);
        for (const auto* group : {&trace.spatial, &trace.a2v, &trace.v2a, &trace.joint})
            for (const auto& call : *group)
                for (const auto& w : call.weights) {
                    ++matrices;
                    const std::size_t cols = w.dim(1);
                    for (std::size_t i = 0; i < w.dim(0); ++i) {
                        double sum = 0;
                        for (std::size_t j = 0; j < cols; ++j) sum += w[i * cols + j];
                        row_err = std::max(row_err, std::abs(sum - 1.0));
                    }
                }
    }

    const TokenGrid a2v = a2v_attention(grid, audio, *block.a2v);
    const TokenGrid a2v_perm = a2v_attention(grid, {ops::index_select(audio.embeds, 0, {2, 0, 1})}, *block.a2v);
    const double a2v_err = max_abs_diff(a2v.tokens, a2v_perm.tokens);

    std::vector<std::size_t> perm;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < tok; ++i) perm.push_back(t * tok + (tok - 1 - i));
    TokenGrid shuffled{ops::reshape(ops::index_select(ops::reshape(grid.tokens, {T * tok, d}), 0, perm), {T, tok, d})};
    const double v2a_err =
        max_abs_diff(v2a_attention(audio, grid, *block.v2a).embeds, v2a_attention(audio, shuffled, *block.v2a).embeds);

    const TokenGrid base = spatial_attention(grid, block.spatial, block.spatial_norm);
    double cross_frame = 0.0;
    for (std::size_t src = 0; src < T; ++src) {
        TokenGrid moved{grid.tokens.clone()};
        for (std::size_t i = src * tok * d; i < (src + 1) * tok * d; ++i) moved.tokens.mutable_data()[i] += 0.5;
        const TokenGrid out = spatial_attention(moved, block.spatial, block.spatial_norm);
        for (std::size_t t = 0; t < T; ++t)
            if (t != src)
                cross_frame = std::max(cross_frame, max_abs_diff(ops::slice(out.tokens, 0, t, t + 1),
                                                                 ops::slice(base.tokens, 0, t, t + 1)));
    }
    const bool ok = row_err <= kRowSumTol && a2v_err <= kPermutationTol && v2a_err <= kPermutationTol &&
                    cross_frame <= kCrossFrameTol;
    return {ok, fmt("row-sum err %.2g over %zu matrices; A2V perm %.2g; V2A perm %.2g; cross-frame %.2g", row_err,
                    matrices, a2v_err, v2a_err, cross_frame)};
}

Outcome loss_oracle() {
    const double single = contrastive_loss(Tensor::from({1, 1}, {0.42}), Tensor::scalar(2.0)).item();
    const double hand = contrastive_loss(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::scalar(0.0)).item();
    Rng rng(12);
    double perm_err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor f = rng.normal_tensor({6, 5}, 1.0), g = rng.normal_tensor({6, 5}, 1.0);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        const Tensor scale = Tensor::scalar(rng.uniform(0.0, 4.6));
        const double x = contrastive_loss(similarity_matrix({f, g}), scale).item();
        const double y =
            contrastive_loss(similarity_matrix({ops::index_select(f, 0, perm), ops::index_select(g, 0, perm)}), scale)
                .item();
        perm_err = std::max(perm_err, std::abs(x - y));
    }
    // Each row and column is a two-way softmax with logits (1, 0): -log(e / (e + 1)).
    const double oracle = std::log1p(std::exp(-1.0));
    const bool ok = single == 0.0 && std::abs(hand - kLossHandValue) <= kLossHandTol &&
                    std::abs(hand - oracle) <= kLossOracleTol && perm_err <= kLossPermutationTol;
    return {ok, fmt("B=1 loss %.3g; B=2 hand case %.6f (want %.4f +/- %.0e, oracle %.6f); joint-permutation %.2g",
                    std::abs(single), hand, kLossHandValue, kLossHandTol, oracle, perm_err)};
}

Outcome ablation() {
    SyntheticDatasetSpec data_spec;  // 8x8 frames, 16 frames per clip, 6 attributes
    data_spec.num_clips = 500;
    data_spec.frames = 4;
    data_spec.visual_fraction = 0.3;
    data_spec.seed = 20240601;
    const Dataset data = generate_synthetic(data_spec);

    ModelConfig model;
    model.layers = 2;
    model.av_blocks = 2;
    TrainConfig train;
    train.steps = 800;
    train.batch_size = 8;
    // Nothing here is pretrained, so both groups train at the same rate.
    train.adam.lr_slow = 1e-3;
    train.adam.lr_new = 1e-3;
    train.adam.weight_decay_slow = 0.0;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto rows = run_ablation_blocks(data, model, train, seeds,
                                          {BlockVariant::video_only, BlockVariant::A2V_only, BlockVariant::A2V_V2A});
    const double video = rows[0].mean_r1(), a2v = rows[1].mean_r1(), dual = rows[2].mean_r1();
    const bool ok = dual >= video + kAblationMargin && dual >= a2v;
    auto spread = [](const AblationRow& r) { return fmt("%.2f [%.0f, %.0f]", r.mean_r1(), r.min_r1(), r.max_r1()); };
    return {ok, fmt("val R@1 (%zu train / %zu val, 3 seeds, mean [min, max]): video_only %s, A2V_only %s, "
                    "A2V_V2A %s; margin over video_only %.2f (need >= %.0f), over A2V_only %.2f (need >= 0)",
                    data.train_size(), data.val_size(), spread(rows[0]).c_str(), spread(rows[1]).c_str(),
                    spread(rows[2]).c_str(), dual - video, kAblationMargin, dual - a2v)};
}

Outcome cost_model() {
    const CostReport eclipse = count_flops(ArchConfig::vit_b32(32, BlockVariant::A2V_V2A));
    const CostReport video = count_flops(ArchConfig::vit_b32(96, BlockVariant::video_only));
    const double ge = eclipse.total_gflops(), gv = video.total_gflops();
    const bool ordered = ge < gv && eclipse.peak_activation_values < video.peak_activation_values;
    const double dev_e = ge / kReferenceEclipseGflops - 1.0, dev_v = gv / kReferenceVideoGflops - 1.0;
    const bool calibrated = std::abs(dev_e) <= kCostCalibration && std::abs(dev_v) <= kCostCalibration;

    ModelConfig tiny;
    tiny.d = 8;
    tiny.heads = 2;
    tiny.layers = 2;
    tiny.av_blocks = 2;
    tiny.frames = 2;
    tiny.height = 2;
    tiny.width = 6;
    tiny.patch = 2;
    EclipseModel model(tiny, 1);
    Rng rng(3);
    const TextSequence text{{1, 2, 3}};
    MacCounter counter;
    model.encode_video({rng.uniform_tensor({2, 2, 6, 3}, 0.0, 1.0), {}, ""}, {rng.normal_tensor({2, 8, 8}, 1.0)});
    model.encode_text(text);
    const double executed = static_cast<double>(counter.count());
    const double analytic = count_flops(ArchConfig::from_model(tiny, text.tokens.size())).total_macs();
    const double instrumented_err = std::abs(analytic - executed) / executed;
    const bool instrumented = instrumented_err <= kCostInstrumentedTol;

    return {ordered && calibrated && instrumented,
            fmt("ECLIPSE@32 %.1f vs video-only@96 %.1f GFLOPs (ordering %s); vs reference 827/1251: %+.1f%% / "
                "%+.1f%% (tol +/-%.0f%%: %s); instrumented diff %.2g%% (%s)",
                ge, gv, ordered ? "ok" : "WRONG", 100 * dev_e, 100 * dev_v, 100 * kCostCalibration,
                calibrated ? "ok" : "outside", 100 * instrumented_err, instrumented ? "ok" : "outside")};
}

Outcome metric_oracle() {
    const Tensor sim = Tensor::from({4, 4}, {0.9, 0.1, 0.2, 0.3, 0.8, 0.5, 0.1, 0.2, 0.1, 0.2, 0.7, 0.3, 0.5, 0.6, 0.7, 0.1});
    const RetrievalResult r = rank_metrics(sim, {0, 1, 2, 3});
    const bool hand = r.ranks == std::vector<std::size_t>{1, 2, 1, 4} && r.r1 == 50.0 && r.r5 == 100.0 &&
                      r.mean_rank == 2.0;
    Rng rng(13);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t q = 1 + rng.uniform_int(0, 9), g = q + rng.uniform_int(0, 9);
        const Tensor s = rng.normal_tensor({q, g}, 1.0);
        std::vector<std::size_t> truth(q);
        for (auto& t : truth) t = rng.uniform_int(0, g - 1);
        const double a = rng.uniform(0.1, 5.0), b = rng.uniform(-3.0, 3.0);
        std::vector<double> warped(s.numel());
        for (std::size_t i = 0; i < warped.size(); ++i) warped[i] = std::tanh(a * s[i]) + b + 0.01 * s[i];
        violations += rank_metrics(s, truth).ranks != rank_metrics(Tensor::from({q, g}, warped), truth).ranks;
    }
    return {hand && violations == 0,
            fmt("hand 4x4 ranks %s (R@1 %.0f, R@5 %.0f, MnR %.2f); monotone transforms: %zu/1000 mismatches",
                hand ? "exact" : "WRONG", r.r1, r.r5, r.mean_rank, violations)};
}

Outcome determinism() {
    testing::TempDir dir("acceptance-determinism");
    std::ofstream(dir / "config.json") << R"({
        "seed": 99,
        "data": {"num_clips": 60, "visual_fraction": 0.3},
        "model": {"d": 16, "heads": 2, "variant": "A2V_V2A"},
        "train": {"steps": 20, "batch_size": 4, "lr_new": 1e-3, "sampling": "random_segment", "eval_every": 10}
    })";
    std::vector<std::string> metrics;
    for (const char* run : {"a", "b"}) {
        std::ostringstream log, out;
        const auto data = dir / (std::string("data_") + run);
        const auto train = dir / (std::string("run_") + run);
        cli::run_generate({dir / "config.json", data}, log);
        cli::run_train({dir / "config.json", data, train}, log);
        cli::run_eval({.checkpoint = train / "checkpoint.bin", .data = data, .split = "val"}, out);
        std::ifstream recorded(train / "metrics.json");
        metrics.push_back(out.str() + std::string(std::istreambuf_iterator<char>(recorded), {}));
    }
    return {metrics[0] == metrics[1],
            fmt("two generate->train->eval runs: metric JSON %s (%zu bytes)",
                metrics[0] == metrics[1] ? "bit-identical" : "DIFFERS", metrics[0].size())};
}

struct Criterion {
    const char* name;
    Outcome (*run)();
    double budget_seconds;
};

}  // namespace
}  // namespace eclipse

int main(int argc, char** argv) {
    using namespace eclipse;
    const std::vector<Criterion> criteria{
        {"zero_init", zero_init, kZeroInitSeconds},
        {"gradients", gradients, kGradSeconds},
        {"attention_algebra", attention_algebra, 0},
        {"loss_oracle", loss_oracle, 0},
        {"ablation", ablation, kAblationSeconds},
        {"cost_model", cost_model, kCostSeconds},
        {"metric_oracle", metric_oracle, 0},
        {"determinism", determinism, 0},
    };
    const std::string only = argc > 1 ? argv[1] : "";
    bool any = false, all_pass = true;
    for (const auto& c : criteria) {
        if (!only.empty() && only != c.name) continue;
        any = true;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.budget_seconds == 0 || secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        all_pass = all_pass && pass;
        std::printf("%s %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    if (!any) {
        std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
        return 2;
    }
    return all_pass ? 0 : 1;
}
