#pragma once

#include <utility>

#include "nmpcmc/linalg.hpp"
#include "nmpcmc/model.hpp"

namespace nmpcmc {

/// Mean/covariance pair of the continuous-discrete extended Kalman filter.
struct FilterState {
    double t = 0.0;
    Vec x_hat;
    Matrix P;
};

/// Per-update diagnostics: innovation, its covariance, and the gain.
struct FilterUpdateReport {
    Vec e;
    Matrix R_e;
    Matrix K;
    Vec y_hat;
};

/// Propagate mean and covariance to t_next by jointly integrating
///
///   dx/dt = f(t, x, u, d),   dP/dt = A P + P A' + sigma sigma'
///
/// with np classical RK4 steps, A = df/dx evaluated along the mean. P is
/// re-symmetrized after every step so asymmetry cannot accumulate over long
/// closed loops. Throws NonFiniteState on divergence.
FilterState predict(const FilterState& fs, const Vec& u, const Vec& d, double t_next,
                    const Model& model, int np);

/// Measurement update in Joseph stabilized form:
///
///   e = y - g(t, x), R_e = R + C P C', K = P C' R_e^{-1},
///   x+ = x + K e,    P+ = (I - K C) P (I - K C)' + K R K'.
///
/// R_e is applied through its Cholesky factor; a factorization failure
/// (inconsistent noise model) raises NotPositiveDefinite.
std::pair<FilterState, FilterUpdateReport> filter_update(double t, const Vec& x_pred,
                                                         const Matrix& p_pred, const Vec& y,
                                                         const Matrix& r, const Model& model);

}  // namespace nmpcmc
