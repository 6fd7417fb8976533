#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace eclipse::cli {

// Each command writes its artifacts and a short human-readable log; errors are thrown.

struct GenerateOptions {
    std::filesystem::path config;
    std::filesystem::path out;
};
void run_generate(const GenerateOptions& opts, std::ostream& log);

struct TrainOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> data;  // regenerated from the config when absent
    std::filesystem::path out;                  // receives checkpoint.bin, loss.csv, metrics.json
};
void run_train(const TrainOptions& opts, std::ostream& log);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;
    std::string split = "val";  // val | train | all
    std::string sampling = "uniform";
    std::uint64_t seed = 0;
};
/// Writes the RetrievalResult JSON to `out`.
void run_eval(const EvalOptions& opts, std::ostream& out);

struct AblateOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> data;
    std::string sweep = "variant";  // variant | av_blocks | sampling | all
    std::size_t seeds = 3;
    std::filesystem::path out;  // CSV
};
void run_ablate(const AblateOptions& opts, std::ostream& log);

struct CostOptions {
    std::size_t eclipse_frames = 32;
    std::size_t video_frames = 96;
    double audio_gflops = 1.8;
    bool include_text = false;
    std::size_t batch = 1;
    std::string format = "both";  // json | table | both
};
void run_cost(const CostOptions& opts, std::ostream& out);

struct SaliencyOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;
    std::size_t index = 0;
    std::filesystem::path out;  // directory: saliency.pgm, saliency.json
};
void run_saliency(const SaliencyOptions& opts, std::ostream& log);

}  // namespace eclipse::cli
