#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/matrix.hpp"
#include "alora/sample.hpp"

namespace alora {

/// Principal-angle similarity of the column spaces of two matrices sharing
/// their row count d: ||U1^T U2||_F^2 / min(rank1, rank2), in [0, 1].
/// Pass A-side matrices transposed (d_in x r) so the long side is the row
/// dimension. Throws for a zero matrix.
double subspace_similarity(const Matrix& m1, const Matrix& m2);

/// W = m V with m_j the norm of column j and V unit-norm columns.
struct MagDir {
    Vector magnitude;
    Matrix direction;
    std::vector<std::size_t> zero_columns;  // direction left as zero
};

MagDir mag_dir(const Matrix& w);

struct MagDirDelta {
    double delta_m = 0.0;
    double delta_d = 0.0;
    std::size_t undefined_pairs = 0;  // column pairs where either side is zero
};

/// Mean absolute magnitude change and mean (1 - cos) direction change over
/// columns. Pairs with a zero column contribute 0 to delta_d.
MagDirDelta delta_mag_dir(const Matrix& w1, const Matrix& w2);

struct PairCosine {
    std::size_t first;
    std::size_t second;
    double cosine;
};

struct ConflictReport {
    std::size_t count = 0;
    std::vector<PairCosine> pairs;
    std::vector<std::size_t> excluded;  // zero-norm components
};

/// Flattened cosine for every unordered pair of non-zero components; a pair
/// with negative cosine is a conflict.
ConflictReport conflict_count(std::span<const Matrix> components);

/// Per-task metrics against single-task baselines. higher_is_better[k] is the
/// delta_k flag: 1 when larger raw values are better (accuracy), 0 for
/// errors such as MSE.
struct TaskScores {
    Vector values;
    Vector baseline;
    std::vector<int> higher_is_better;
};

/// (1/K) sum_k (-1)^delta_k (M_k - M_0k) / M_0k * 100. Lower is better.
double delta_m_percent(const TaskScores& scores);

struct GateRecord {
    std::size_t sample;
    std::size_t task;
    std::size_t layer;
    Vector weights;
};

struct GateLog {
    std::vector<GateRecord> rows;
    std::optional<std::string> warning;
};

/// Router outputs for every sample, in sample order. All adapters here are a
/// single adapted layer, so layer is always 0.
GateLog gate_activation_log(const AdapterState& state, std::span<const Sample> samples);

}  // namespace alora
