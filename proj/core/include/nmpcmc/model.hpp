#pragma once

#include <functional>

#include "nmpcmc/linalg.hpp"
#include "nmpcmc/rng.hpp"

namespace nmpcmc {

/// Continuous-discrete stochastic model bundle
///
///   dx(t) = f(t, x, u, d, p) dt + sigma(t, x, u, d, p) dw(t)
///   y(t_i) = g(t_i, x(t_i), p) + v_i,   v_i ~ N(0, R)
///   z(t)  = h(t, x(t), p)
///
/// All callables are expected to be pure; a Model is immutable after
/// construction and may be shared freely across threads.
struct Model {
    int n_x = 0;  ///< state dimension
    int n_u = 0;  ///< input dimension
    int n_d = 0;  ///< disturbance dimension (may be zero)
    int n_y = 0;  ///< measurement dimension
    int n_z = 0;  ///< output dimension
    int n_w = 0;  ///< Wiener process dimension (columns of sigma)

    Vec params;

    using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& u, const Vec& d,
                                      const Vec& p)>;
    using DiffusionFn = std::function<Matrix(double t, const Vec& x, const Vec& u, const Vec& d,
                                             const Vec& p)>;
    using StateFn = std::function<Vec(double t, const Vec& x, const Vec& p)>;
    using DriftJacFn = std::function<Matrix(double t, const Vec& x, const Vec& u, const Vec& d,
                                            const Vec& p)>;
    using StateJacFn = std::function<Matrix(double t, const Vec& x, const Vec& p)>;

    DriftFn drift;
    DiffusionFn diffusion;
    StateFn measurement;
    StateFn output_fn;

    /// Optional analytic jacobians; finite differences are used when absent.
    DriftJacFn drift_jacobian_x;
    DriftJacFn drift_jacobian_u;
    StateJacFn measurement_jacobian_x;
    StateJacFn output_jacobian_x;
};

/// Measurement noise description. R may be singular (including all-zero).
struct NoiseSpec {
    Matrix R;
    int n_w = 0;
};

/// One explicit Euler-Maruyama step: x + f dt + sigma dW.
/// Throws NonFiniteState if the result has NaN/Inf components.
Vec euler_maruyama_step(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d,
                        double dt, const Vec& dw);

/// Integrate the SDE over [t0, t1] with ns equal Euler-Maruyama steps under
/// zero-order-hold u, d. Wiener increments are drawn from rng per step,
/// component by component, each ~ N(0, dt). With a zero diffusion this is
/// deterministic explicit Euler.
Vec simulate_interval(const Model& model, double t0, double t1, const Vec& x0, const Vec& u,
                      const Vec& d, int ns, CounterRng& rng);

/// y = g(t, x, p) + L_R zeta with zeta ~ N(0, I); L_R is the (semidefinite)
/// Cholesky factor of noise.R, so R = 0 gives an exact measurement.
Vec measure(const Model& model, const NoiseSpec& noise, double t, const Vec& x, CounterRng& rng);

/// z = h(t, x, p); deterministic.
Vec output(const Model& model, double t, const Vec& x);

/// df/dx at (t, x, u, d): analytic when the model provides it, otherwise
/// central finite differences with per-coordinate step max(1e-6, 1e-6 |x_j|).
Matrix drift_jacobian_x(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d);

/// df/du, same fallback policy with steps based on |u_j|.
Matrix drift_jacobian_u(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d);

/// dg/dx, same fallback policy.
Matrix measurement_jacobian_x(const Model& model, double t, const Vec& x);

/// dh/dx, same fallback policy.
Matrix output_jacobian_x(const Model& model, double t, const Vec& x);

}  // namespace nmpcmc
