#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "alora/matrix.hpp"

namespace alora {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const OptimizerSettings&, const OptimizerSettings&) = default;
};

/// Adam moments (empty for SGD) and the number of steps taken.
struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<Matrix> first;
    std::vector<Matrix> second;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One update of `params` in place. Adam uses bias-corrected moments and no
/// weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void optimizer_step(const OptimizerSettings& settings, std::span<Matrix* const> params,
                    std::span<const Matrix> grads, OptimizerState& state);

}  // namespace alora
