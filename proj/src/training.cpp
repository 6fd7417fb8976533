#include "eclipse/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "eclipse/ops.hpp"
#include "eclipse/rng.hpp"

namespace eclipse {

Tensor similarity_matrix(const BatchEmbeddings& batch, std::vector<std::size_t>* degenerate_rows) {
    const Tensor& f = batch.video;
    const Tensor& g = batch.text;
    if (f.rank() != 2 || g.rank() != 2 || f.shape() != g.shape()) {
        throw ShapeError("similarity_matrix: video " + format_shape(f.shape()) + " and text " +
                         format_shape(g.shape()) + " must both be B×d");
    }
    std::vector<std::size_t> text_degenerate;
    Tensor fn = ops::l2_normalize(f, degenerate_rows);
    Tensor gn = ops::l2_normalize(g, degenerate_rows ? &text_degenerate : nullptr);
    if (degenerate_rows) {
        for (auto r : text_degenerate) degenerate_rows->push_back(r + f.dim(0));
    }
    return ops::matmul(fn, ops::transpose(gn));
}

Tensor contrastive_loss(const Tensor& sim, const Tensor& logit_scale) {
    if (sim.rank() != 2 || sim.dim(0) != sim.dim(1)) {
        throw ShapeError("contrastive_loss: similarity must be square, got " + format_shape(sim.shape()));
    }
    if (logit_scale.numel() != 1) {
        throw ShapeError("contrastive_loss: logit scale must be a scalar, got " + format_shape(logit_scale.shape()));
    }
    const std::size_t b = sim.dim(0);
    std::vector<std::size_t> diagonal(b);
    std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
    Tensor scale = ops::clamp_max(ops::exp(ops::reshape(logit_scale, {1})), kMaxLogitScale);
    Tensor logits = ops::mul(sim, scale);
    Tensor video_to_text = ops::mean_all(ops::gather_cols(ops::log_softmax_rows(logits), diagonal));
    Tensor text_to_video = ops::mean_all(ops::gather_cols(ops::log_softmax_rows(ops::transpose(logits)), diagonal));
    return ops::scale(ops::add(video_to_text, text_to_video), -0.5);
}

AdamOptimizer::AdamOptimizer(ParamStore& store, AdamConfig config) : store_(store), config_(config) {
    store_.audit();
    for (const auto& p : store_.params()) {
        m_.emplace_back(p.value.numel(), 0.0);
        v_.emplace_back(p.value.numel(), 0.0);
    }
}

double AdamOptimizer::learning_rate(ParamGroup group) const {
    return group == ParamGroup::PretrainedSlow ? config_.lr_slow : config_.lr_new;
}

void AdamOptimizer::step() {
    auto& params = store_.params();
    if (params.size() != m_.size()) throw std::logic_error("parameter store changed after optimizer creation");
    for (const auto& p : params) {
        if (!p.value.has_grad()) continue;
        for (double g : p.value.impl()->grad) {
            if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in parameter '" + p.name + "'");
        }
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const double lr = learning_rate(p.group);
        const double decay = p.group == ParamGroup::PretrainedSlow ? config_.weight_decay_slow : 0.0;
        auto values = p.value.mutable_data();
        const auto& grad = p.value.impl()->grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = grad.empty() ? 0.0 : grad[k];
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            values[k] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + decay * values[k]);
        }
    }
}

namespace {

std::uint64_t clip_seed(std::uint64_t seed, std::size_t clip) {
    // splitmix64 finalizer over (seed, clip)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (clip + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Tensor embed_example(const EclipseModel& model, const Example& ex, SamplingStrategy sampling, std::uint64_t seed) {
    const auto indices = sample_frames(ex.clip.num_frames(), model.config().frames, sampling, seed);
    SampledExample s = take_frames(ex, indices);
    return model.encode_video(s.clip, s.audio).embedding;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    std::vector<Tensor> reshaped;
    reshaped.reserve(rows.size());
    for (const auto& r : rows) reshaped.push_back(ops::reshape(r, {1, r.numel()}));
    return reshaped.size() == 1 ? reshaped.front() : ops::concat(reshaped, 0);
}

}  // namespace

RetrievalResult evaluate_retrieval(const EclipseModel& model, std::span<const Example> examples,
                                   SamplingStrategy sampling, std::uint64_t seed) {
    if (examples.empty()) throw std::invalid_argument("evaluate_retrieval: no examples");
    std::vector<Tensor> videos;
    std::vector<Tensor> texts;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        videos.push_back(embed_example(model, examples[i], sampling, clip_seed(seed, i)));
        texts.push_back(model.encode_text(examples[i].text));
    }
    // query = text, gallery = video
    Tensor sim = similarity_matrix({stack_rows(texts), stack_rows(videos)});
    std::vector<std::size_t> truth(examples.size());
    std::iota(truth.begin(), truth.end(), std::size_t{0});
    return rank_metrics(sim, truth);
}

double loss_and_gradients(EclipseModel& model, std::span<const Example* const> batch, SamplingStrategy sampling,
                          std::uint64_t sample_seed) {
    GradientTape tape;
    double value = 0.0;
    {
        TapeScope scope(tape);
        std::vector<Tensor> videos;
        std::vector<Tensor> texts;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            videos.push_back(embed_example(model, *batch[i], sampling, clip_seed(sample_seed, i)));
            texts.push_back(model.encode_text(batch[i]->text));
        }
        Tensor sim = similarity_matrix({stack_rows(videos), stack_rows(texts)});
        Tensor loss = contrastive_loss(sim, model.logit_scale());
        value = loss.item();
        model.params().zero_grad();
        tape.backward(loss);
    }
    tape.reset();
    return value;
}

TrainResult train(EclipseModel& model, const Dataset& data, const TrainConfig& config, std::uint64_t seed) {
    if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
    const auto train_split = data.train();
    if (train_split.size() < config.batch_size) {
        throw std::invalid_argument("train: batch of " + std::to_string(config.batch_size) + " exceeds " +
                                    std::to_string(train_split.size()) + " training clips");
    }
    AdamOptimizer optimizer(model.params(), config.adam);
    Rng rng(seed);
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    TrainResult result;
    for (std::size_t step = 1; step <= config.steps; ++step) {
        std::vector<const Example*> batch;
        while (batch.size() < config.batch_size) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng.engine());
                cursor = 0;
            }
            batch.push_back(&train_split[order[cursor++]]);
        }
        double loss = 0.0;
        try {
            loss = loss_and_gradients(model, batch, config.sampling, rng.next());
        } catch (const NumericError& e) {
            throw TrainingAborted("step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(loss)) {
            throw TrainingAborted("non-finite loss at step " + std::to_string(step));
        }
        try {
            optimizer.step();
        } catch (const NonFiniteGradient& e) {
            throw TrainingAborted("step " + std::to_string(step) + ": " + e.what());
        }
        result.curve.push_back({step, loss, config.adam.lr_slow, config.adam.lr_new});
        const bool periodic = config.eval_every > 0 && step % config.eval_every == 0;
        if ((periodic || step == config.steps) && !data.val().empty()) {
            result.evaluations.emplace_back(step, evaluate_retrieval(model, data.val(), SamplingStrategy::Uniform, seed));
        }
    }
    model.params().zero_grad();
    return result;
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& curve) {
    out << "step,loss,lr_slow,lr_new\n";
    out.precision(17);
    for (const auto& r : curve) out << r.step << ',' << r.loss << ',' << r.lr_slow << ',' << r.lr_new << '\n';
}

}  // namespace eclipse
