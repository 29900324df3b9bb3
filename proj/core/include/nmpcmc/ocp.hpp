#pragma once

#include <vector>

#include "nmpcmc/linalg.hpp"
#include "nmpcmc/model.hpp"

namespace nmpcmc {

/// Prediction horizon: N control intervals of length Ts, each integrated
/// with Nc classical RK4 steps.
struct Horizon {
    int N = 0;
    double Ts = 0.0;
    int Nc = 1;
};

/// Multiple-shooting regulator NLP over one horizon:
///
///   min  sum_{k=1..N} (h(x_k) - zbar_k)' Qz (h(x_k) - zbar_k) Ts
///   s.t. x_{k+1} = F(t_k, x_k, u_k, d_k),  k = 0..N-1   (x_0 a parameter)
///        u_min <= u_k <= u_max
///
/// with decision vector xi = (u_0, x_1, u_1, ..., u_{N-1}, x_N).
struct NlpInstance {
    Horizon horizon;
    Model model;
    double t0 = 0.0;
    Vec x0;
    Vec u_min, u_max;
    std::vector<Vec> d_seq;      ///< per-stage disturbance; empty means none
    std::vector<Vec> setpoints;  ///< zbar at stages 1..N (length N)
    Matrix Qz;
};

/// Index arithmetic for the interleaved decision vector.
struct XiLayout {
    int N = 0, n_x = 0, n_u = 0;

    int size() const { return N * (n_x + n_u); }
    int u_offset(int k) const { return k * (n_u + n_x); }
    int x_offset(int k) const { return (k - 1) * (n_u + n_x) + n_u; }
};

XiLayout layout_of(const NlpInstance& nlp);

struct ShootResult {
    Vec F;
    Matrix dF_dx;
    Matrix dF_du;
};

/// Defect residuals and their stage blocks, b_k = F_k - x_{k+1} = -g_k.
struct ConstraintBlocks {
    Vec g;
    std::vector<Matrix> dF_dx;
    std::vector<Matrix> dF_du;
    std::vector<Vec> b;
};

/// Integrate dx/dt = f over one control interval with horizon.Nc classical
/// RK4 steps under zero-order hold, propagating dF/dx and dF/du by forward
/// sensitivities through the same discrete scheme, so the jacobians are the
/// exact derivatives of the returned map.
ShootResult shoot(const Model& model, double t_k, const Vec& x_k, const Vec& u_k, const Vec& d_k,
                  const Horizon& horizon);

/// Objective value and gradient. The gradient is nonzero only on the x_k
/// slots (the tracking term is partially separable across stages).
std::pair<double, Vec> eval_objective(const NlpInstance& nlp, const Vec& xi);

/// Stage-ordered defect residuals g_k = x_{k+1} - F_k and the derivative
/// blocks consumed by the QP subproblem.
ConstraintBlocks eval_constraints(const NlpInstance& nlp, const Vec& xi);

/// Build a dynamically feasible xi by forward shooting from nlp.x0 with the
/// given input sequence (length N). Used for initial guesses and tests.
Vec xi_from_inputs(const NlpInstance& nlp, const std::vector<Vec>& u_seq);

}  // namespace nmpcmc
