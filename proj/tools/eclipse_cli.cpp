#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eclipse/cli.hpp"

int main(int argc, char** argv) {
    using namespace eclipse::cli;
    CLI::App app{"ECLIPSE audiovisual text-to-video retrieval"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
    generate->add_option("-c,--config", gen.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    generate->add_option("-o,--out", gen.out, "Output directory")->required();

    TrainOptions tr;
    std::string train_data;
    auto* train = app.add_subcommand("train", "Train and write checkpoint, loss curve, metrics");
    train->add_option("-c,--config", tr.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("-d,--data", train_data, "Dataset directory (default: generate from config)");
    train->add_option("-o,--out", tr.out, "Output directory")->required();

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Text-to-video retrieval metrics as JSON");
    eval->add_option("-k,--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
    eval->add_option("-d,--data", ev.data)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", ev.split)->check(CLI::IsMember({"val", "train", "all"}));
    eval->add_option("--sampling", ev.sampling)->check(CLI::IsMember({"uniform", "random_segment"}));
    eval->add_option("--seed", ev.seed, "Frame sampling seed");

    AblateOptions ab;
    std::string ablate_data;
    auto* ablate = app.add_subcommand("ablate", "Variant / av-block / sampling sweeps as CSV");
    ablate->add_option("-c,--config", ab.config)->required()->check(CLI::ExistingFile);
    ablate->add_option("-d,--data", ablate_data);
    ablate->add_option("--sweep", ab.sweep)->check(CLI::IsMember({"variant", "av_blocks", "sampling", "all"}));
    ablate->add_option("--seeds", ab.seeds)->check(CLI::PositiveNumber);
    ablate->add_option("-o,--out", ab.out, "CSV path")->required();

    CostOptions co;
    auto* cost = app.add_subcommand("cost", "FLOP and activation-memory comparison");
    cost->add_option("--eclipse-frames", co.eclipse_frames);
    cost->add_option("--video-frames", co.video_frames);
    cost->add_option("--audio-gflops", co.audio_gflops, "Audio encoder GFLOPs per spectrogram");
    cost->add_flag("--include-text", co.include_text);
    cost->add_option("--batch", co.batch)->check(CLI::PositiveNumber);
    cost->add_option("--format", co.format)->check(CLI::IsMember({"json", "table", "both"}));

    SaliencyOptions sa;
    auto* saliency = app.add_subcommand("saliency", "Audio-to-patch saliency grids");
    saliency->add_option("-k,--checkpoint", sa.checkpoint)->required()->check(CLI::ExistingFile);
    saliency->add_option("-d,--data", sa.data)->required()->check(CLI::ExistingDirectory);
    saliency->add_option("-i,--index", sa.index, "Clip index");
    saliency->add_option("-o,--out", sa.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) run_generate(gen, std::cout);
        if (*train) {
            if (!train_data.empty()) tr.data = train_data;
            run_train(tr, std::cout);
        }
        if (*eval) run_eval(ev, std::cout);
        if (*ablate) {
            if (!ablate_data.empty()) ab.data = ablate_data;
            run_ablate(ab, std::cout);
        }
        if (*cost) run_cost(co, std::cout);
        if (*saliency) run_saliency(sa, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
