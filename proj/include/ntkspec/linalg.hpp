#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ntkspec {

// Dense row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool all_finite() const;
    double max_abs() const;
    double frobenius_norm() const;
    double trace() const;

    DenseMatrix transpose() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
// a * a^T
DenseMatrix gram_rows(const DenseMatrix& a);
// a^T * a
DenseMatrix gram_cols(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x);
std::vector<double> multiply_transposed(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

struct Spectrum {
    std::vector<double> eigenvalues;  // ascending
    std::size_t iterations_used = 0;

    double min() const { return eigenvalues.front(); }
    double max() const { return eigenvalues.back(); }
};

struct EigenDecomposition {
    Spectrum spectrum;
    DenseMatrix vectors;  // column j pairs with spectrum.eigenvalues[j]
};

// Symmetry tolerance is relative: |m_ij - m_ji| <= 1e-12 * max|m|.
inline constexpr double kSymmetryTolerance = 1e-12;
// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kRankThreshold = 1e-6;

// Householder tridiagonalization followed by implicit-shift QL.
Spectrum sym_eigen(const DenseMatrix& m);
EigenDecomposition sym_eigen_vectors(const DenseMatrix& m);

double min_singular_value(const DenseMatrix& m);
// Descending singular values of m, computed from the smaller Gram matrix.
std::vector<double> singular_values(const DenseMatrix& m);

struct NormEstimate {
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

// Largest singular value by power iteration on m^T m.
NormEstimate operator_norm(const DenseMatrix& m, std::size_t max_iters = 1000,
                           double rel_tol = 1e-10, std::uint64_t seed = 0x9e3779b9ULL);

// Minimum-norm least-squares solution of a x = y.
std::vector<double> least_squares(const DenseMatrix& a, std::span<const double> y);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t point_count = 0;
};

// Ordinary least squares of log(ys) against log(xs).
SlopeFit loglog_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace ntkspec
