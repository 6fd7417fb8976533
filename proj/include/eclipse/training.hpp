#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "eclipse/dataset.hpp"
#include "eclipse/metrics.hpp"
#include "eclipse/model.hpp"
#include "eclipse/params.hpp"

namespace eclipse {

/// Row i of `video` pairs with row i of `text`.
struct BatchEmbeddings {
    Tensor video;  // B×d
    Tensor text;   // B×d
};

/// M[i][j] = cos(video_i, text_j). Zero-norm rows are reported through `degenerate_rows`
/// (video rows first, then text rows offset by B).
Tensor similarity_matrix(const BatchEmbeddings& batch, std::vector<std::size_t>* degenerate_rows = nullptr);

inline constexpr double kMaxLogitScale = 100.0;

/// Symmetric InfoNCE over a square similarity matrix: the mean of the video→text (row) and
/// text→video (column) cross-entropies with diagonal targets, at scale min(exp(logit_scale), 100).
Tensor contrastive_loss(const Tensor& sim, const Tensor& logit_scale);

struct AdamConfig {
    double lr_slow = 1e-7;
    double lr_new = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay_slow = 0.2;  // decoupled, slow group only
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bias-corrected Adam with one learning rate per ParamGroup.
class AdamOptimizer {
public:
    AdamOptimizer(ParamStore& store, AdamConfig config);

    /// Applies one update from the gradients currently held by the parameters. If any
    /// gradient is non-finite nothing is modified and NonFiniteGradient names the parameter.
    void step();

    std::size_t step_count() const noexcept { return steps_; }
    const AdamConfig& config() const noexcept { return config_; }
    double learning_rate(ParamGroup group) const;
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

private:
    ParamStore& store_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t steps_ = 0;
};

struct TrainConfig {
    std::size_t steps = 300;
    std::size_t batch_size = 8;
    AdamConfig adam;
    std::size_t eval_every = 0;  // 0 = only after the final step
    SamplingStrategy sampling = SamplingStrategy::Uniform;
};

struct LossRecord {
    std::size_t step;
    double loss;
    double lr_slow;
    double lr_new;
};

struct TrainResult {
    std::vector<LossRecord> curve;
    std::vector<std::pair<std::size_t, RetrievalResult>> evaluations;
};

class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Embeds every example (frames chosen by `sampling`, seeded per clip) and returns
/// text-to-video metrics with query i matched to gallery item i.
RetrievalResult evaluate_retrieval(const EclipseModel& model, std::span<const Example> examples,
                                   SamplingStrategy sampling, std::uint64_t seed);

/// One forward/backward pass over `batch`; leaves gradients in the parameters and returns the loss.
double loss_and_gradients(EclipseModel& model, std::span<const Example* const> batch, SamplingStrategy sampling,
                          std::uint64_t sample_seed);

/// Contrastive training on the training split; evaluates on the validation split every
/// `eval_every` steps and after the last step. Deterministic for a fixed seed.
TrainResult train(EclipseModel& model, const Dataset& data, const TrainConfig& config, std::uint64_t seed);

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& curve);

}  // namespace eclipse
