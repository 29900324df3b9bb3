#include "nmpcmc/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace nmpcmc {

std::size_t Matrix::checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) {
        throw DimensionMismatch("Matrix dimensions must be nonnegative, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    }
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int nr = static_cast<int>(rows.size());
    const int nc = nr > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Matrix m(nr, nc);
    int r = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != nc) {
            throw DimensionMismatch("from_rows: ragged initializer list");
        }
        int c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix Matrix::diag(const Vec& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows(); ++i) m(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

void Matrix::set_identity() {
    set_zero();
    const int n = rows_ < cols_ ? rows_ : cols_;
    for (int i = 0; i < n; ++i) (*this)(i, i) = 1.0;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (int c = 0; c < cols_; ++c)
        for (int r = 0; r < rows_; ++r) t(c, r) = (*this)(r, c);
    return t;
}

Vec Matrix::col(int c) const {
    Vec v(static_cast<std::size_t>(rows_));
    for (int r = 0; r < rows_; ++r) v[static_cast<std::size_t>(r)] = (*this)(r, c);
    return v;
}

namespace {

Matrix cholesky_impl(const Matrix& a, bool semidefinite) {
    if (a.rows() != a.cols()) {
        throw DimensionMismatch("cholesky_factor: matrix must be square");
    }
    const int n = a.rows();
    // Pivot tolerance for the semidefinite variant, scaled by the largest
    // diagonal entry so an exactly-zero R factors to L = 0.
    double scale = 0.0;
    if (semidefinite) {
        for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    }
    const double tol = semidefinite ? 1e-13 * std::max(scale, 1.0) : 0.0;

    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (semidefinite && std::abs(d) <= tol) {
            // rank-deficient direction: leave the column zero
            continue;
        }
        if (d <= 0.0 || !std::isfinite(d)) {
            throw NotPositiveDefinite("cholesky_factor: pivot " + std::to_string(j) +
                                      " is " + std::to_string(d));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace

Matrix cholesky_factor(const Matrix& a) { return cholesky_impl(a, false); }

Matrix cholesky_factor_semidefinite(const Matrix& a) { return cholesky_impl(a, true); }

void cholesky_solve_in_place(const Matrix& l, Vec& b) {
    const int n = l.rows();
    if (l.cols() != n || static_cast<int>(b.size()) != n) {
        throw DimensionMismatch("cholesky_solve: rhs length does not match factor");
    }
    // forward: L y = b
    for (int i = 0; i < n; ++i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= l(i, k) * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / l(i, i);
    }
    // backward: Lᵀ x = y
    for (int i = n - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / l(i, i);
    }
}

Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    if (l.rows() != l.cols() || b.rows() != l.rows()) {
        throw DimensionMismatch("cholesky_solve: dimensions do not conform");
    }
    Matrix x = b;
    Vec column(static_cast<std::size_t>(b.rows()));
    for (int c = 0; c < b.cols(); ++c) {
        for (int r = 0; r < b.rows(); ++r) column[static_cast<std::size_t>(r)] = x(r, c);
        cholesky_solve_in_place(l, column);
        for (int r = 0; r < b.rows(); ++r) x(r, c) = column[static_cast<std::size_t>(r)];
    }
    return x;
}

void gemm_into(double alpha, const Matrix& a, bool trans_a, const Matrix& b, bool trans_b,
               double beta, Matrix& c) {
    const int m = trans_a ? a.cols() : a.rows();
    const int ka = trans_a ? a.rows() : a.cols();
    const int kb = trans_b ? b.cols() : b.rows();
    const int n = trans_b ? b.rows() : b.cols();
    if (ka != kb) throw DimensionMismatch("gemm: inner dimensions do not conform");
    if (c.rows() != m || c.cols() != n) throw DimensionMismatch("gemm: C has wrong shape");

    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            for (int k = 0; k < ka; ++k) {
                const double av = trans_a ? a(k, i) : a(i, k);
                const double bv = trans_b ? b(j, k) : b(k, j);
                s += av * bv;
            }
            c(i, j) = alpha * s + (beta == 0.0 ? 0.0 : beta * c(i, j));
        }
    }
}

Matrix gemm(double alpha, const Matrix& a, bool trans_a, const Matrix& b, bool trans_b,
            double beta, const Matrix& c) {
    const int m = trans_a ? a.cols() : a.rows();
    const int n = trans_b ? b.rows() : b.cols();
    Matrix out(m, n);
    if (beta != 0.0) {
        if (c.rows() != m || c.cols() != n) throw DimensionMismatch("gemm: C has wrong shape");
        out = c;
    }
    gemm_into(alpha, a, trans_a, b, trans_b, beta, out);
    return out;
}

void gemv_into(double alpha, const Matrix& a, bool trans_a, const Vec& x, double beta, Vec& y) {
    const int m = trans_a ? a.cols() : a.rows();
    const int k = trans_a ? a.rows() : a.cols();
    if (static_cast<int>(x.size()) != k) throw DimensionMismatch("gemv: x length does not conform");
    if (static_cast<int>(y.size()) != m) throw DimensionMismatch("gemv: y length does not conform");
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += (trans_a ? a(j, i) : a(i, j)) * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = alpha * s + (beta == 0.0 ? 0.0 : beta * y[static_cast<std::size_t>(i)]);
    }
}

Vec matvec(const Matrix& a, bool trans_a, const Vec& x) {
    Vec y(static_cast<std::size_t>(trans_a ? a.cols() : a.rows()));
    gemv_into(1.0, a, trans_a, x, 0.0, y);
    return y;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double one_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
    return std::sqrt(s);
}

void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) throw DimensionMismatch("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void symmetrize(Matrix& a) {
    for (int c = 0; c < a.cols(); ++c) {
        for (int r = c + 1; r < a.rows(); ++r) {
            const double v = 0.5 * (a(r, c) + a(c, r));
            a(r, c) = v;
            a(c, r) = v;
        }
    }
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a.data()[i])) return false;
    return true;
}

}  // namespace nmpcmc
