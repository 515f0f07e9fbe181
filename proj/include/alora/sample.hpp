#pragma once

#include <cstddef>

#include "alora/matrix.hpp"

namespace alora {

/// One regression example: input x, target y, and the task it came from.
struct Sample {
    Vector x;
    Vector y;
    std::size_t task = 0;
};

/// Per-sample MSE, ||y - t||^2 / d_out.
double mse(std::span<const double> y, std::span<const double> target);

/// d(mse)/dy = 2 (y - t) / d_out.
Vector mse_gradient(std::span<const double> y, std::span<const double> target);

}  // namespace alora
