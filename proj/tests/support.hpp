#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "alora/matrix.hpp"
#include "alora/rng.hpp"
#include "alora/sample.hpp"

namespace testing {

inline alora::Vector random_vector(std::size_t n, alora::RngStream& rng) {
    alora::Vector v(n);
    for (double& e : v) e = rng.normal();
    return v;
}

inline std::vector<alora::Sample> random_batch(std::size_t n, std::size_t d_in, std::size_t d_out,
                                               alora::RngStream& rng) {
    std::vector<alora::Sample> batch(n);
    for (auto& s : batch) {
        s.x = random_vector(d_in, rng);
        s.y = random_vector(d_out, rng);
    }
    return batch;
}

template <class Model>
void randomize(Model& model, alora::RngStream& rng, double stddev = 0.5) {
    for (alora::Matrix* m : trainable(model))
        for (double& v : m->data()) v = stddev * rng.normal();
}

// Triple loop in i-k-j order, written independently of the library kernels.
inline alora::Matrix naive_matmul(const alora::Matrix& a, const alora::Matrix& b) {
    alora::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline alora::Vector naive_matvec(const alora::Matrix& m, const alora::Vector& x) {
    alora::Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) y[i] += m(i, j) * x[j];
    return y;
}

inline double rel_diff(const alora::Matrix& a, const alora::Matrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double max_abs(const alora::Vector& a, const alora::Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace testing
