#include "alora/reference.hpp"

#include <stdexcept>

namespace alora::reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("reference::matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double aip = a(i, p);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
        }
    return c;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
    if (m.cols() != x.size()) throw std::invalid_argument("reference::matvec: length mismatch");
    Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
    if (m.rows() != x.size()) throw std::invalid_argument("reference::matvec_transposed: length mismatch");
    Vector y(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += m(i, j) * xi;
    }
    return y;
}

}  // namespace alora::reference
