#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alora/model.hpp"
#include "alora/optimizer.hpp"
#include "alora/rng.hpp"
#include "alora/tasks.hpp"

namespace alora {

struct TrainConfig {
    OptimizerSettings optimizer;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;  // drives mini-batch shuffling only

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

/// Everything besides the model needed to resume a session exactly.
struct SessionProgress {
    OptimizerState optimizer;
    RngCursor rng;
    std::size_t epochs_done = 0;
    std::size_t steps_done = 0;
    std::vector<double> loss_curve;
};

template <class Model>
struct StepEvent {
    std::size_t epoch;
    std::size_t step;  // 1-based global step
    const Model& model;
    std::span<const Sample> batch;
    const FlatGradient& gradient;
};

template <class Model>
struct StepObserver {
    std::function<void(const StepEvent<Model>&)> before_update;  // model is pre-update
    std::function<void(const StepEvent<Model>&)> after_update;   // model is post-update
};

/// Mini-batch training of a model against a frozen base W0. The epoch order
/// is a Fisher-Yates shuffle drawn from a stream seeded by cfg.seed; the
/// shuffle stream and optimizer moments are part of SessionProgress so a
/// session rebuilt from a snapshot continues the same trajectory.
template <TrainableModel Model>
class TrainSession {
public:
    TrainSession(Model model, const Matrix& w0, std::span<const Sample> data, TrainConfig cfg)
        : model_(std::move(model)), w0_(w0), data_(data), cfg_(cfg) {
        validate(cfg_);
        if (data_.empty()) throw std::invalid_argument("train: empty dataset");
        progress_.rng = RngCursor{cfg_.seed, 0};
    }

    TrainSession(Model model, const Matrix& w0, std::span<const Sample> data, TrainConfig cfg,
                 SessionProgress progress)
        : TrainSession(std::move(model), w0, data, cfg) {
        progress_ = std::move(progress);
    }

    void set_observer(StepObserver<Model> observer) { observer_ = std::move(observer); }

    /// Runs one epoch and returns its mean batch loss.
    double run_epoch() {
        RngStream rng = RngStream::restore(progress_.rng);
        std::vector<std::size_t> order(data_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        progress_.rng = rng.cursor();

        std::vector<Sample> batch;
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(data_[order[k]]);

            const FlatGradient gradient = batch_gradient(std::as_const(model_), w0_, std::span<const Sample>(batch));
            const std::size_t step = progress_.steps_done + 1;
            if (!std::isfinite(gradient.loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(progress_.epochs_done + 1) + ", step " +
                                         std::to_string(step));
            }
            const StepEvent<Model> pre{progress_.epochs_done + 1, step, model_, batch, gradient};
            if (observer_.before_update) observer_.before_update(pre);

            const std::vector<Matrix*> params = trainable(model_);
            optimizer_step(cfg_.optimizer, params, gradient.grads, progress_.optimizer);
            progress_.steps_done = step;

            const StepEvent<Model> post{progress_.epochs_done + 1, step, model_, batch, gradient};
            if (observer_.after_update) observer_.after_update(post);
            loss_sum += gradient.loss;
            ++batches;
        }
        ++progress_.epochs_done;
        const double mean_loss = loss_sum / static_cast<double>(batches);
        progress_.loss_curve.push_back(mean_loss);
        return mean_loss;
    }

    /// Runs until cfg.epochs epochs are done; returns the full loss curve.
    const std::vector<double>& run() {
        while (progress_.epochs_done < cfg_.epochs) run_epoch();
        return progress_.loss_curve;
    }

    const Model& model() const noexcept { return model_; }
    Model& model() noexcept { return model_; }
    Model release() && { return std::move(model_); }
    const SessionProgress& progress() const noexcept { return progress_; }
    const TrainConfig& config() const noexcept { return cfg_; }

private:
    Model model_;
    const Matrix& w0_;
    std::span<const Sample> data_;
    TrainConfig cfg_;
    SessionProgress progress_;
    StepObserver<Model> observer_;
};

template <TrainableModel Model>
struct TrainResult {
    Model model;
    std::vector<double> loss_curve;
};

template <TrainableModel Model>
TrainResult<Model> train(Model model, const Matrix& w0, std::span<const Sample> data, const TrainConfig& cfg) {
    TrainSession<Model> session(std::move(model), w0, data, cfg);
    std::vector<double> curve = session.run();
    return {std::move(session).release(), std::move(curve)};
}

/// Mean over samples of ||predict(x) - y||^2 / d_out. Never mutates the model.
template <TrainableModel Model>
double evaluate(const Model& model, const Matrix& w0, std::span<const Sample> data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    double total = 0.0;
    for (const Sample& s : data) total += mse(predict(model, w0, s.x), s.y);
    return total / static_cast<double>(data.size());
}

/// One independently trained vanilla adapter per task, scored by test MSE.
/// Task k uses init seed derive_seed(train.seed, "baseline.init", k) and
/// shuffle seed derive_seed(train.seed, "baseline.shuffle", k).
std::vector<double> single_task_baselines(const SyntheticSuite& suite, const AdapterConfig& adapter,
                                          const TrainConfig& train);

}  // namespace alora
