#include "alora/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alora/linalg.hpp"

namespace alora {

double subspace_similarity(const Matrix& m1, const Matrix& m2) {
    if (m1.rows() != m2.rows())
        throw std::invalid_argument("subspace_similarity: row counts differ (" + std::to_string(m1.rows()) +
                                    " vs " + std::to_string(m2.rows()) + ")");
    const Basis u1 = orthonormal_basis(m1);
    const Basis u2 = orthonormal_basis(m2);
    if (u1.degenerate || u2.degenerate)
        throw std::invalid_argument(std::string("subspace_similarity: rank-0 input (") +
                                    (u1.degenerate ? "first" : "second") + " matrix is zero)");
    const Matrix overlap = matmul(transpose(u1.vectors), u2.vectors);
    const double f = frobenius_norm(overlap);
    return f * f / static_cast<double>(std::min(u1.rank, u2.rank));
}

MagDir mag_dir(const Matrix& w) {
    MagDir out;
    out.magnitude.assign(w.cols(), 0.0);
    out.direction = Matrix(w.rows(), w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, j) * w(i, j);
        const double n = std::sqrt(s);
        out.magnitude[j] = n;
        if (n == 0.0) {
            out.zero_columns.push_back(j);
            continue;
        }
        for (std::size_t i = 0; i < w.rows(); ++i) out.direction(i, j) = w(i, j) / n;
    }
    return out;
}

MagDirDelta delta_mag_dir(const Matrix& w1, const Matrix& w2) {
    if (!w1.same_shape(w2)) throw std::invalid_argument("delta_mag_dir: shape mismatch");
    if (w1.cols() == 0) throw std::invalid_argument("delta_mag_dir: matrices have no columns");
    const MagDir a = mag_dir(w1);
    const MagDir b = mag_dir(w2);
    MagDirDelta d;
    for (std::size_t j = 0; j < w1.cols(); ++j) {
        d.delta_m += std::abs(a.magnitude[j] - b.magnitude[j]);
        if (a.magnitude[j] == 0.0 || b.magnitude[j] == 0.0) {
            ++d.undefined_pairs;
            continue;
        }
        double c = 0.0;
        for (std::size_t i = 0; i < w1.rows(); ++i) c += a.direction(i, j) * b.direction(i, j);
        d.delta_d += 1.0 - std::clamp(c, -1.0, 1.0);
    }
    const double n = static_cast<double>(w1.cols());
    d.delta_m /= n;
    d.delta_d /= n;
    return d;
}

ConflictReport conflict_count(std::span<const Matrix> components) {
    if (components.size() < 2) throw std::invalid_argument("conflict_count: need at least 2 components");
    for (const Matrix& c : components)
        if (!c.same_shape(components.front()))
            throw std::invalid_argument("conflict_count: components differ in shape");

    ConflictReport report;
    std::vector<double> norms(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        norms[i] = frobenius_norm(components[i]);
        if (norms[i] == 0.0) report.excluded.push_back(i);
    }
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (norms[i] == 0.0) continue;
        for (std::size_t j = i + 1; j < components.size(); ++j) {
            if (norms[j] == 0.0) continue;
            const double c = frobenius_dot(components[i], components[j]) / (norms[i] * norms[j]);
            report.pairs.push_back({i, j, c});
            if (c < 0.0) ++report.count;
        }
    }
    return report;
}

double delta_m_percent(const TaskScores& scores) {
    const std::size_t k = scores.values.size();
    if (k == 0) throw std::invalid_argument("delta_m_percent: no tasks");
    if (scores.baseline.size() != k || scores.higher_is_better.size() != k)
        throw std::invalid_argument("delta_m_percent: values, baselines and direction flags differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (scores.baseline[i] == 0.0)
            throw std::invalid_argument("delta_m_percent: zero baseline for task " + std::to_string(i));
        const double rel = (scores.values[i] - scores.baseline[i]) / scores.baseline[i];
        total += (scores.higher_is_better[i] ? -rel : rel);
    }
    return total / static_cast<double>(k) * 100.0;
}

GateLog gate_activation_log(const AdapterState& state, std::span<const Sample> samples) {
    GateLog log;
    if (!is_routed(state.config.scheme)) {
        log.warning = "gate_activation_log: scheme '" + std::string(to_string(state.config.scheme)) +
                      "' has no router; table is empty";
        return log;
    }
    log.rows.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        log.rows.push_back({i, samples[i].task, 0, route(state, samples[i].x)});
    return log;
}

}  // namespace alora
