#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace alora {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Row-major layout is part of the
/// checkpoint format, so `data()` is the exact on-disk element order.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix column(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

    std::span<double> data() noexcept { return values_; }
    std::span<const double> data() const noexcept { return values_; }
    std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * cols_, cols_}; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Element-wise and structural helpers. All throw std::invalid_argument on
// shape mismatch.
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
void add_scaled(Matrix& dst, double s, const Matrix& src);
Matrix outer(std::span<const double> u, std::span<const double> v);
Matrix column_block(const Matrix& m, std::size_t first, std::size_t count);
Matrix row_block(const Matrix& m, std::size_t first, std::size_t count);

double frobenius_norm(const Matrix& m);
double frobenius_dot(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// Parallel kernels. Each output element is accumulated in a fixed order, so
// results are bitwise independent of the thread count and equal to the
// serial versions in alora::reference.
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& m, std::span<const double> x);
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

}  // namespace alora
