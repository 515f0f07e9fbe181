#pragma once

// Serial reference implementations of the parallel kernels. They are kept
// for testing (bitwise comparison) and for the kernel benchmarks.

#include <span>

#include "alora/matrix.hpp"

namespace alora::reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& m, std::span<const double> x);
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

}  // namespace alora::reference
