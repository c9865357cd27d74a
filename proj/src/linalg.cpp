#include "ntkspec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ntkspec/error.hpp"
#include "ntkspec/rng.hpp"

namespace ntkspec {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorKind::Dimension,
            "matrix data length " + std::to_string(data_.size()) + " != rows*cols");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, ErrorKind::Dimension, "ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
    DenseMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double DenseMatrix::frobenius_norm() const { return norm2(data_); }

double DenseMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), ErrorKind::Dimension, "multiply: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

DenseMatrix gram_rows(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    DenseMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = dot(a.row(i), a.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

DenseMatrix gram_cols(const DenseMatrix& a) {
    const std::size_t n = a.cols();
    DenseMatrix g(n, n);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            const double ai = row[i];
            if (ai == 0.0) continue;
            auto out = g.row(i);
            for (std::size_t j = i; j < n; ++j) out[j] += ai * row[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Dimension,
            std::string(op) + ": shape mismatch");
}

}  // namespace

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DenseMatrix c(a.rows(), a.cols());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), c.data().begin(),
                   std::multiplies<>());
    return c;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add");
    DenseMatrix c(a.rows(), a.cols());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), c.data().begin(),
                   std::plus<>());
    return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "subtract");
    DenseMatrix c(a.rows(), a.cols());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), c.data().begin(),
                   std::minus<>());
    return c;
}

std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), ErrorKind::Dimension, "matrix-vector: length mismatch");
    std::vector<double> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

std::vector<double> multiply_transposed(const DenseMatrix& a, std::span<const double> x) {
    require(a.rows() == x.size(), ErrorKind::Dimension, "transposed matrix-vector: length mismatch");
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const auto row = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += xi * row[j];
    }
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

void validate_symmetric(const DenseMatrix& m) {
    require(!m.empty(), ErrorKind::InvalidInput, "sym_eigen: empty matrix");
    require(m.square(), ErrorKind::Dimension, "sym_eigen: matrix is not square");
    require(m.all_finite(), ErrorKind::InvalidInput, "sym_eigen: non-finite entry");
    const double tol = kSymmetryTolerance * m.max_abs();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            require(std::abs(m(i, j) - m(j, i)) <= tol, ErrorKind::Asymmetry,
                    "sym_eigen: asymmetric beyond tolerance");
}

// Householder reduction to tridiagonal form (EISPACK tred2 lineage). On exit
// d holds the diagonal, e the subdiagonal in e[1..n-1], and v the accumulated
// orthogonal transform when vectors are requested.
void tridiagonalize(DenseMatrix& v, std::vector<double>& d, std::vector<double>& e,
                    bool want_vectors) {
    const std::size_t n = v.rows();
    for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (std::size_t k = j + 1; k <= i - 1; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    if (!want_vectors) {
        for (std::size_t i = 0; i < n; ++i) d[i] = v(i, i);
        e[0] = 0.0;
        return;
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e). Returns total sweeps.
std::size_t tridiagonal_ql(DenseMatrix& v, std::vector<double>& d, std::vector<double>& e,
                           bool want_vectors) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    const double eps = std::numeric_limits<double>::epsilon();
    const std::size_t max_sweeps = 60 * n + 60;
    std::size_t sweeps = 0;
    double f = 0.0;
    double tst1 = 0.0;

    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            do {
                if (++sweeps > max_sweeps)
                    fail(ErrorKind::Numerical, "sym_eigen: QL iteration did not converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t ii = m; ii-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[ii];
                    h = c * p;
                    r = std::hypot(p, e[ii]);
                    e[ii + 1] = s * r;
                    s = e[ii] / r;
                    c = p / r;
                    p = c * d[ii] - s * g;
                    d[ii + 1] = h + s * (c * g + s * d[ii]);
                    if (want_vectors) {
                        for (std::size_t k = 0; k < n; ++k) {
                            h = v(k, ii + 1);
                            v(k, ii + 1) = s * v(k, ii) + c * h;
                            v(k, ii) = c * v(k, ii) - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
    return sweeps;
}

EigenDecomposition decompose(const DenseMatrix& m, bool want_vectors) {
    validate_symmetric(m);
    const std::size_t n = m.rows();
    DenseMatrix v = m;
    std::vector<double> d(n), e(n);
    tridiagonalize(v, d, e, want_vectors);
    const std::size_t sweeps = tridiagonal_ql(v, d, e, want_vectors);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

    EigenDecomposition out;
    out.spectrum.iterations_used = sweeps;
    out.spectrum.eigenvalues.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.spectrum.eigenvalues[j] = d[order[j]];
    if (want_vectors) {
        out.vectors = DenseMatrix(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
    }
    return out;
}

}  // namespace

Spectrum sym_eigen(const DenseMatrix& m) { return decompose(m, false).spectrum; }

EigenDecomposition sym_eigen_vectors(const DenseMatrix& m) { return decompose(m, true); }

namespace {

DenseMatrix smaller_gram(const DenseMatrix& m) {
    require(m.rows() >= 1 && m.cols() >= 1, ErrorKind::InvalidInput, "empty matrix");
    require(m.all_finite(), ErrorKind::InvalidInput, "non-finite entry");
    return m.rows() <= m.cols() ? gram_rows(m) : gram_cols(m);
}

}  // namespace

double min_singular_value(const DenseMatrix& m) {
    const Spectrum s = sym_eigen(smaller_gram(m));
    return std::sqrt(std::max(0.0, s.min()));
}

std::vector<double> singular_values(const DenseMatrix& m) {
    const Spectrum s = sym_eigen(smaller_gram(m));
    std::vector<double> out(s.eigenvalues.rbegin(), s.eigenvalues.rend());
    for (double& v : out) v = std::sqrt(std::max(0.0, v));
    return out;
}

NormEstimate operator_norm(const DenseMatrix& m, std::size_t max_iters, double rel_tol,
                           std::uint64_t seed) {
    require(max_iters >= 1, ErrorKind::InvalidInput, "operator_norm: max_iters must be >= 1");
    require(rel_tol > 0, ErrorKind::InvalidInput, "operator_norm: rel_tol must be positive");
    require(m.all_finite(), ErrorKind::InvalidInput, "operator_norm: non-finite entry");
    if (m.empty() || m.max_abs() == 0.0) return {0.0, 0, true};

    Rng rng(seed, Stream::PowerIteration);
    std::vector<double> v(m.cols());
    for (double& x : v) x = rng.normal();
    double nv = norm2(v);
    for (double& x : v) x /= nv;

    NormEstimate est{0.0, 0, false};
    double previous = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        const std::vector<double> u = multiply(m, v);
        const double sigma = norm2(u);
        est.value = std::max(est.value, sigma);
        est.iterations = it;
        if (it > 1 && std::abs(sigma - previous) <= rel_tol * sigma) {
            est.converged = true;
            break;
        }
        previous = sigma;
        v = multiply_transposed(m, u);
        nv = norm2(v);
        if (nv == 0.0) {
            est.converged = true;
            break;
        }
        for (double& x : v) x /= nv;
    }
    return est;
}

std::vector<double> least_squares(const DenseMatrix& a, std::span<const double> y) {
    require(a.rows() == y.size(), ErrorKind::Dimension, "least_squares: rows != length(y)");
    require(a.rows() >= 1 && a.cols() >= 1, ErrorKind::InvalidInput, "least_squares: empty matrix");
    const bool wide = a.rows() <= a.cols();
    const DenseMatrix gram = wide ? gram_rows(a) : gram_cols(a);
    const EigenDecomposition eig = sym_eigen_vectors(gram);
    const auto& lambda = eig.spectrum.eigenvalues;
    const double cutoff = 1e-10 * std::max(0.0, eig.spectrum.max());

    // rhs lives in the Gram's space: y for a wide system, a^T y otherwise.
    const std::vector<double> rhs = wide ? std::vector<double>(y.begin(), y.end())
                                         : multiply_transposed(a, y);
    const std::size_t n = gram.rows();
    std::vector<double> z(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (lambda[j] <= cutoff || lambda[j] <= 0.0) continue;
        double proj = 0.0;
        for (std::size_t k = 0; k < n; ++k) proj += eig.vectors(k, j) * rhs[k];
        proj /= lambda[j];
        for (std::size_t k = 0; k < n; ++k) z[k] += proj * eig.vectors(k, j);
    }
    return wide ? multiply_transposed(a, z) : z;
}

SlopeFit loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    require(xs.size() == ys.size(), ErrorKind::Dimension, "loglog_slope: length mismatch");
    require(xs.size() >= 2, ErrorKind::InvalidInput, "loglog_slope: need at least two points");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(xs[i] > 0 && ys[i] > 0 && std::isfinite(xs[i]) && std::isfinite(ys[i]),
                ErrorKind::InvalidInput, "loglog_slope: values must be positive and finite");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    require(sxx > 0.0, ErrorKind::Degenerate, "loglog_slope: all x values are equal");

    SlopeFit fit;
    fit.point_count = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

}  // namespace ntkspec
