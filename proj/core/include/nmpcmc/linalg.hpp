#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "nmpcmc/errors.hpp"

namespace nmpcmc {

using Vec = std::vector<double>;

/// Dense column-major matrix of doubles.
///
/// Intended for the small stage-wise blocks of the solver stack (states,
/// inputs, covariances), typically a handful of rows/columns and never more
/// than a few dozen. No views, no expression templates, no BLAS: every
/// operation below is a plain loop with a fixed summation order, so results
/// are bitwise reproducible regardless of how many threads call them.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(checked_size(rows, cols), 0.0) {}

    static Matrix identity(int n);
    /// Build from row-major nested initializer lists: {{1,2},{3,4}}.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix diag(const Vec& d);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(c) * rows_ + r]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(c) * rows_ + r]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void set_zero();
    void set_identity();
    Matrix transposed() const;

    /// Column k as a vector (convenience for measurement/gain columns).
    Vec col(int c) const;

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    static std::size_t checked_size(int rows, int cols);

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// --- factor / solve / multiply -------------------------------------------

/// Lower Cholesky factor L of a symmetric positive definite A (L·Lᵀ = A).
/// Only the lower triangle of A is referenced; symmetry is the caller's
/// responsibility. Throws NotPositiveDefinite on any non-positive pivot.
Matrix cholesky_factor(const Matrix& a);

/// Cholesky factor for positive *semi*definite matrices: zero pivots produce
/// zero columns instead of failing. Throws NotPositiveDefinite only when a
/// pivot is negative beyond round-off. Used for noise covariances where
/// R = 0 (or rank deficient R) is legitimate.
Matrix cholesky_factor_semidefinite(const Matrix& a);

/// Solve (L·Lᵀ)·X = B column by column given the lower factor L.
Matrix cholesky_solve(const Matrix& l, const Matrix& b);

/// In-place single-rhs variant of cholesky_solve.
void cholesky_solve_in_place(const Matrix& l, Vec& b);

/// alpha·op(A)·op(B) + beta·C with op = transpose when the flag is set.
/// C is ignored (treated as zero) when beta == 0; otherwise its dimensions
/// must match the product. Fixed k-ascending summation order.
Matrix gemm(double alpha, const Matrix& a, bool trans_a, const Matrix& b, bool trans_b,
            double beta, const Matrix& c);

/// gemm writing into a preallocated C (C ← alpha·op(A)·op(B) + beta·C).
void gemm_into(double alpha, const Matrix& a, bool trans_a, const Matrix& b, bool trans_b,
               double beta, Matrix& c);

// --- vector helpers -------------------------------------------------------

/// y = alpha·op(A)·x + beta·y
void gemv_into(double alpha, const Matrix& a, bool trans_a, const Vec& x, double beta, Vec& y);
Vec matvec(const Matrix& a, bool trans_a, const Vec& x);

double dot(const Vec& a, const Vec& b);
double inf_norm(const Vec& v);
double one_norm(const Vec& v);
double frobenius_norm(const Matrix& a);
/// y += alpha·x
void axpy(double alpha, const Vec& x, Vec& y);

/// (A + Aᵀ)/2, in place.
void symmetrize(Matrix& a);

bool all_finite(const Vec& v);
bool all_finite(const Matrix& a);

}  // namespace nmpcmc
