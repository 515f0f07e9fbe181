#pragma once

#include <concepts>
#include <span>
#include <stdexcept>
#include <vector>

#include "alora/matrix.hpp"
#include "alora/parallel.hpp"
#include "alora/sample.hpp"

namespace alora {

/// Gradients in a model's `trainable()` order plus the loss they came from.
struct FlatGradient {
    std::vector<Matrix> grads;
    double loss = 0.0;
};

/// Anything the generic trainer can fit: a set of trainable matrices, a batch
/// gradient over them and a prediction function. Found by ADL.
template <class Model>
concept TrainableModel = requires(Model& m, const Model& cm, const Matrix& w0,
                                  std::span<const Sample> batch, std::span<const double> x) {
    { trainable(m) } -> std::same_as<std::vector<Matrix*>>;
    { batch_gradient(cm, w0, batch) } -> std::same_as<FlatGradient>;
    { predict(cm, w0, x) } -> std::same_as<Vector>;
};

namespace detail {

inline void accumulate(FlatGradient& total, const FlatGradient& part) {
    if (total.grads.empty()) {
        total = part;
        return;
    }
    for (std::size_t k = 0; k < total.grads.size(); ++k) add_scaled(total.grads[k], 1.0, part.grads[k]);
    total.loss += part.loss;
}

inline void divide(FlatGradient& total, std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    for (Matrix& g : total.grads)
        for (double& v : g.data()) v *= inv;
    total.loss *= inv;
}

}  // namespace detail

/// Mean of per-sample gradients. Samples are evaluated in parallel into
/// per-sample slots, then summed serially in batch order.
template <class PerSample>
FlatGradient mean_gradient(std::span<const Sample> batch, PerSample&& per_sample) {
    if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
    std::vector<FlatGradient> slots(batch.size());
    parallel_for(
        batch.size(), [&](std::size_t k) { slots[k] = per_sample(batch[k]); }, batch.size() >= 8);
    FlatGradient total;
    for (const FlatGradient& s : slots) detail::accumulate(total, s);
    detail::divide(total, batch.size());
    return total;
}

namespace reference {

template <class PerSample>
FlatGradient mean_gradient(std::span<const Sample> batch, PerSample&& per_sample) {
    if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
    FlatGradient total;
    for (const Sample& s : batch) detail::accumulate(total, per_sample(s));
    detail::divide(total, batch.size());
    return total;
}

}  // namespace reference

}  // namespace alora
