#pragma once

#include <span>

#include "alora/matrix.hpp"

namespace alora {

/// Thin SVD m = U diag(S) Vt with k = min(rows, cols): U is rows x k with
/// orthonormal columns, Vt is k x cols with orthonormal rows, S descending.
struct Svd {
    Matrix u;
    Vector s;
    Matrix vt;
};

Svd svd_thin(const Matrix& m);

/// Orthonormal basis of the column space of a matrix. Columns whose singular
/// value falls below kRankTolerance * S_max are dropped. A zero matrix yields
/// rank 0 with `degenerate` set rather than an error.
struct Basis {
    Matrix vectors;  // rows x rank
    std::size_t rank = 0;
    bool degenerate = false;
};

inline constexpr double kRankTolerance = 1e-12;

Basis orthonormal_basis(const Matrix& m);

/// Max-subtracted softmax.
Vector softmax(std::span<const double> logits);

}  // namespace alora
