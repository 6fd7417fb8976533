#include "eclipse/cli.hpp"

#include <fstream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "eclipse/ablation.hpp"
#include "eclipse/checkpoint.hpp"
#include "eclipse/config.hpp"
#include "eclipse/costmodel.hpp"
#include "eclipse/dataset.hpp"
#include "eclipse/saliency.hpp"
#include "eclipse/training.hpp"

namespace eclipse::cli {

namespace {

Dataset dataset_for(const RunConfig& cfg, const std::optional<std::filesystem::path>& dir) {
    if (!dir) return generate_synthetic(cfg.data);
    Dataset data = load_dataset(*dir);
    RunConfig check = cfg;
    check.data = data.spec;
    check_consistent(check);
    return data;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void run_generate(const GenerateOptions& opts, std::ostream& log) {
    const RunConfig cfg = load_run_config(opts.config);
    const Dataset data = generate_synthetic(cfg.data);
    save_dataset(data, opts.out);
    log << "wrote " << data.examples.size() << " clips (" << data.train_size() << " train, " << data.val_size()
        << " val) to " << opts.out.string() << '\n';
}

void run_train(const TrainOptions& opts, std::ostream& log) {
    const RunConfig cfg = load_run_config(opts.config);
    const Dataset data = dataset_for(cfg, opts.data);
    EclipseModel model(cfg.model, derive_seed(cfg.seed, "init"));
    const TrainResult result = train(model, data, cfg.train, derive_seed(cfg.seed, "train"));

    std::filesystem::create_directories(opts.out);
    save_checkpoint(model, opts.out / "checkpoint.bin");
    auto csv = open_out(opts.out / "loss.csv");
    write_loss_csv(csv, result.curve);
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& [step, metrics] : result.evaluations) {
        nlohmann::json j = to_json(metrics);
        j["step"] = step;
        evals.push_back(std::move(j));
    }
    auto metrics = open_out(opts.out / "metrics.json");
    metrics << evals.dump(2) << '\n';
    log << "trained " << cfg.train.steps << " steps";
    if (!result.curve.empty()) log << ", final loss " << result.curve.back().loss;
    if (!result.evaluations.empty()) log << ", val R@1 " << result.evaluations.back().second.r1;
    log << '\n';
}

void run_eval(const EvalOptions& opts, std::ostream& out) {
    const auto model = load_checkpoint(opts.checkpoint);
    const Dataset data = load_dataset(opts.data);
    RunConfig check;
    check.model = model->config();
    check.data = data.spec;
    check_consistent(check);
    std::span<const Example> examples;
    if (opts.split == "val") {
        examples = data.val();
    } else if (opts.split == "train") {
        examples = data.train();
    } else if (opts.split == "all") {
        examples = data.examples;
    } else {
        throw std::invalid_argument("unknown split '" + opts.split + "'");
    }
    const RetrievalResult r =
        evaluate_retrieval(*model, examples, sampling_strategy_from_string(opts.sampling), opts.seed);
    out << to_json(r).dump(2) << '\n';
}

void run_ablate(const AblateOptions& opts, std::ostream& log) {
    const RunConfig cfg = load_run_config(opts.config);
    const Dataset data = dataset_for(cfg, opts.data);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < opts.seeds; ++i) seeds.push_back(derive_seed(cfg.seed, "ablation-" + std::to_string(i)));
    std::vector<AblationRow> rows;
    auto append = [&rows](std::vector<AblationRow> more) { rows.insert(rows.end(), more.begin(), more.end()); };
    const bool all = opts.sweep == "all";
    if (!all && opts.sweep != "variant" && opts.sweep != "av_blocks" && opts.sweep != "sampling") {
        throw std::invalid_argument("unknown sweep '" + opts.sweep + "'");
    }
    if (all || opts.sweep == "variant") append(run_ablation_blocks(data, cfg.model, cfg.train, seeds));
    if (all || opts.sweep == "av_blocks") append(run_ablation_av_blocks(data, cfg.model, cfg.train, seeds));
    if (all || opts.sweep == "sampling") append(run_ablation_sampling(data, cfg.model, cfg.train, seeds));
    auto csv = open_out(opts.out);
    write_ablation_csv(csv, rows);
    for (const auto& r : rows) {
        log << r.factor << ' ' << to_string(r.variant) << " k=" << r.av_blocks << ' ' << to_string(r.sampling)
            << ": R@1 " << r.mean_r1() << " [" << r.min_r1() << ", " << r.max_r1() << "]\n";
    }
}

void run_cost(const CostOptions& opts, std::ostream& out) {
    ArchConfig eclipse_cfg = ArchConfig::vit_b32(opts.eclipse_frames, BlockVariant::A2V_V2A);
    ArchConfig video_cfg = ArchConfig::vit_b32(opts.video_frames, BlockVariant::video_only);
    for (ArchConfig* c : {&eclipse_cfg, &video_cfg}) {
        c->audio.flops_per_spectrogram = opts.audio_gflops * 1e9;
        c->text.include = opts.include_text;
    }
    const CostComparison cmp = compare(eclipse_cfg, video_cfg);
    if (opts.format != "json" && opts.format != "table" && opts.format != "both") {
        throw std::invalid_argument("unknown format '" + opts.format + "'");
    }
    if (opts.format != "table") {
        nlohmann::json j = to_json(cmp, opts.batch);
        j["a"]["config"] = to_json(eclipse_cfg);
        j["b"]["config"] = to_json(video_cfg);
        out << j.dump(2) << '\n';
    }
    if (opts.format != "json") {
        out << "a = ECLIPSE @" << opts.eclipse_frames << " frames, b = video-only @" << opts.video_frames
            << " frames\n";
        out << format_table(cmp, opts.batch);
    }
}

void run_saliency(const SaliencyOptions& opts, std::ostream& log) {
    const auto model = load_checkpoint(opts.checkpoint);
    const Dataset data = load_dataset(opts.data);
    if (opts.index >= data.examples.size()) {
        throw std::out_of_range("clip index " + std::to_string(opts.index) + " outside dataset of " +
                                std::to_string(data.examples.size()));
    }
    const SaliencyMap map = compute_saliency(*model, data.examples[opts.index], SamplingStrategy::Uniform, 0);
    std::filesystem::create_directories(opts.out);
    write_saliency_pgm(map, opts.out / "saliency.pgm");
    auto json = open_out(opts.out / "saliency.json");
    json << to_json(map).dump(2) << '\n';
    log << "saliency for clip " << opts.index << ": " << map.frames() << " frames of " << map.grid_h() << "x"
        << map.grid_w() << " patches\n";
}

}  // namespace eclipse::cli
