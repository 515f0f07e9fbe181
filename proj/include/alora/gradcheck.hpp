#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "alora/model.hpp"

namespace alora {

struct GradCheck {
    double max_rel_error = 0.0;  // worst matrix
    std::size_t matrices = 0;
};

/// Mean batch loss of a model, from predict().
template <TrainableModel Model>
double batch_loss(const Model& model, const Matrix& w0, std::span<const Sample> batch) {
    double total = 0.0;
    for (const Sample& s : batch) total += mse(predict(model, w0, s.x), s.y);
    return total / static_cast<double>(batch.size());
}

/// Compares batch_gradient with central differences of batch_loss, one entry
/// at a time. The error of a matrix is ||analytic - numeric|| / max(||analytic||,
/// ||numeric||, 1e-3); the floor keeps near-zero gradients from amplifying
/// difference noise.
template <TrainableModel Model>
GradCheck finite_difference_check(Model model, const Matrix& w0, std::span<const Sample> batch, double h = 1e-5) {
    const FlatGradient analytic = batch_gradient(std::as_const(model), w0, batch);
    const std::vector<Matrix*> params = trainable(model);
    GradCheck out;
    out.matrices = params.size();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix numeric(params[k]->rows(), params[k]->cols());
        auto values = params[k]->data();
        for (std::size_t e = 0; e < values.size(); ++e) {
            const double saved = values[e];
            values[e] = saved + h;
            const double up = batch_loss(std::as_const(model), w0, batch);
            values[e] = saved - h;
            const double down = batch_loss(std::as_const(model), w0, batch);
            values[e] = saved;
            numeric.data()[e] = (up - down) / (2.0 * h);
        }
        const double diff = frobenius_norm(subtract(analytic.grads[k], numeric));
        const double scale = std::max({frobenius_norm(analytic.grads[k]), frobenius_norm(numeric), 1e-3});
        out.max_rel_error = std::max(out.max_rel_error, diff / scale);
    }
    return out;
}

}  // namespace alora
