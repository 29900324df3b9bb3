#pragma once

// Reference implementations used only by tests. Everything here is written
// independently of the library kernels (plain Gaussian elimination, series
// expm, Jacobi eigenvalues) so the two sides can cross-check each other.

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "nmpcmc/linalg.hpp"

namespace oracle {

using nmpcmc::Matrix;
using nmpcmc::Vec;

inline Matrix mul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    for (int j = 0; j < c.cols(); ++j)
        for (int i = 0; i < c.rows(); ++i) c(i, j) += b(i, j);
    return c;
}

inline Matrix scale(double s, const Matrix& a) {
    Matrix c = a;
    for (int j = 0; j < c.cols(); ++j)
        for (int i = 0; i < c.rows(); ++i) c(i, j) *= s;
    return c;
}

/// Solve A X = B by Gaussian elimination with partial pivoting.
inline Matrix solve(Matrix a, Matrix b) {
    const int n = a.rows();
    if (a.cols() != n || b.rows() != n) throw std::invalid_argument("oracle::solve dims");
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (std::abs(a(piv, k)) < 1e-300) throw std::runtime_error("oracle::solve singular");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            for (int j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(piv, j));
        }
        for (int i = k + 1; i < n; ++i) {
            const double m = a(i, k) / a(k, k);
            for (int j = k; j < n; ++j) a(i, j) -= m * a(k, j);
            for (int j = 0; j < b.cols(); ++j) b(i, j) -= m * b(k, j);
        }
    }
    for (int k = n - 1; k >= 0; --k)
        for (int j = 0; j < b.cols(); ++j) {
            double s = b(k, j);
            for (int i = k + 1; i < n; ++i) s -= a(k, i) * b(i, j);
            b(k, j) = s / a(k, k);
        }
    return b;
}

/// Matrix exponential by scaling-and-squaring over a plain Taylor series.
inline Matrix expm(const Matrix& a) {
    const int n = a.rows();
    double norm = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) norm = std::max(norm, std::abs(a(i, j)));
    int squarings = 0;
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const Matrix as = scale(std::ldexp(1.0, -squarings), a);
    Matrix result = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    for (int k = 1; k <= 24; ++k) {
        term = scale(1.0 / k, mul(term, as));
        result = add(result, term);
    }
    for (int s = 0; s < squarings; ++s) result = mul(result, result);
    return result;
}

/// All eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
inline Vec sym_eigenvalues(Matrix a) {
    const int n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    Vec ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
    return ev;
}

inline double min_eigenvalue(const Matrix& a) {
    const Vec ev = sym_eigenvalues(a);
    double m = ev[0];
    for (double v : ev) m = std::min(m, v);
    return m;
}

/// Exact zero-order-hold discretization of dx = A x dt + sigma dw over dt:
/// returns (Ad, Qd) with Ad = e^{A dt} and Qd the integrated process noise
/// (Van Loan's augmented-exponential construction).
inline std::pair<Matrix, Matrix> discretize_lti(const Matrix& a, const Matrix& sigma, double dt) {
    const int n = a.rows();
    const Matrix q = mul(sigma, sigma.transposed());
    Matrix aug(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            aug(i, j) = -a(i, j) * dt;
            aug(i, n + j) = q(i, j) * dt;
            aug(n + i, n + j) = a(j, i) * dt;
        }
    const Matrix e = expm(aug);
    Matrix f12(n, n), f22(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            f12(i, j) = e(i, n + j);
            f22(i, j) = e(n + i, n + j);
        }
    const Matrix ad = f22.transposed();
    return {ad, mul(ad, f12)};
}

/// One textbook discrete Kalman step (subtraction-form covariance update).
struct KalmanRef {
    Vec x;
    Matrix p;

    void predict(const Matrix& ad, const Matrix& qd) {
        Vec xn(x.size(), 0.0);
        for (int i = 0; i < ad.rows(); ++i)
            for (int j = 0; j < ad.cols(); ++j)
                xn[static_cast<std::size_t>(i)] += ad(i, j) * x[static_cast<std::size_t>(j)];
        x = xn;
        p = add(mul(mul(ad, p), ad.transposed()), qd);
    }

    void update(const Matrix& c, const Matrix& r, const Vec& y) {
        const Matrix re = add(mul(mul(c, p), c.transposed()), r);
        const Matrix k = mul(mul(p, c.transposed()), solve(re, Matrix::identity(re.rows())));
        Vec innov = y;
        for (int i = 0; i < c.rows(); ++i)
            for (int j = 0; j < c.cols(); ++j)
                innov[static_cast<std::size_t>(i)] -= c(i, j) * x[static_cast<std::size_t>(j)];
        for (int i = 0; i < k.rows(); ++i)
            for (int j = 0; j < k.cols(); ++j)
                x[static_cast<std::size_t>(i)] += k(i, j) * innov[static_cast<std::size_t>(j)];
        p = add(p, scale(-1.0, mul(mul(k, re), k.transposed())));
    }
};

}  // namespace oracle
