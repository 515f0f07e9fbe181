#include "alora/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace alora {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
    return m;
}

}  // namespace

Svd svd_thin(const Matrix& m) {
    if (m.empty()) throw std::invalid_argument("svd_thin: empty matrix");
    if (!all_finite(m)) throw std::invalid_argument("svd_thin: non-finite input");

    Eigen::Map<const RowMajor> view(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                                    static_cast<Eigen::Index>(m.cols()));
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(Eigen::MatrixXd(view),
                                             Eigen::ComputeThinU | Eigen::ComputeThinV);
    Svd out;
    out.u = from_eigen(solver.matrixU());
    out.vt = from_eigen(solver.matrixV().transpose());
    const auto& sv = solver.singularValues();
    out.s.assign(sv.data(), sv.data() + sv.size());
    return out;
}

Basis orthonormal_basis(const Matrix& m) {
    if (m.cols() == 0) throw std::invalid_argument("orthonormal_basis: matrix has no columns");
    const Svd svd = svd_thin(m);
    const double smax = svd.s.empty() ? 0.0 : svd.s.front();
    Basis basis;
    if (smax == 0.0) {
        basis.vectors = Matrix(m.rows(), 0);
        basis.degenerate = true;
        return basis;
    }
    const double cutoff = kRankTolerance * smax;
    basis.rank = static_cast<std::size_t>(
        std::count_if(svd.s.begin(), svd.s.end(), [&](double s) { return s > cutoff; }));
    basis.vectors = column_block(svd.u, 0, basis.rank);
    return basis;
}

Vector softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    if (!std::all_of(logits.begin(), logits.end(), [](double v) { return std::isfinite(v); }))
        throw std::invalid_argument("softmax: non-finite logit");
    const double peak = *std::max_element(logits.begin(), logits.end());
    Vector w(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        w[i] = std::exp(logits[i] - peak);
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace alora
