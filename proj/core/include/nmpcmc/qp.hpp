#pragma once

#include <utility>
#include <vector>

#include "nmpcmc/linalg.hpp"

namespace nmpcmc {

/// Stage k of the structured QP subproblem
///
///   min  1/2 du_0' R_0 du_0 + r_0' du_0
///        + sum_{k=1..N-1} 1/2 (dx_k, du_k)' [[Q_k, M_k],[M_k', R_k]] (dx_k, du_k)
///                         + q_k' dx_k + r_k' du_k
///        + 1/2 dx_N' P_N dx_N + p_N' dx_N
///   s.t. dx_{k+1} = Jx_k dx_k + Ju_k du_k + b_k,   dx_0 = 0,
///        lb_k <= du_k <= ub_k,
///
/// stored as a sequence of N+1 stages. Which members a stage uses depends on
/// its position: stage 0 has no state cost (dx_0 is a parameter), stage N has
/// only the terminal cost Q = P_N, q = p_N. Jx/Ju are the jacobians of the
/// shooting map F with respect to x and u. Bounds may be +-infinity
/// componentwise; those components simply carry no multiplier.
struct QpStageData {
    Matrix Q, M, R;
    Vec q, r;
    Matrix Jx, Ju;
    Vec b;
    Vec lb, ub;
};

enum class QpStatus { Optimal, MaxIter, Failed };

struct QpSolution {
    Vec delta_xi;  ///< step in decision-vector layout (u_0, x_1, u_1, ..., x_N)
    Vec mu;        ///< equality multipliers, stage-ordered
    Vec nu_l;      ///< lower-bound multipliers, >= 0 (0 for infinite bounds)
    Vec nu_u;      ///< upper-bound multipliers, >= 0
    int iterations = 0;
    QpStatus status = QpStatus::Failed;
};

/// Solve the equality-constrained part exactly (bounds ignored) via one
/// backward Riccati recursion and forward rollout; O(N (n_x + n_u)^3).
/// Returns (delta_xi, mu). Throws NotPositiveDefinite if a stage Hessian
/// H_k = R_k + Ju' P_{k+1} Ju loses definiteness.
std::pair<Vec, Vec> riccati_factor_solve(const std::vector<QpStageData>& stages);

/// Full solve with input box constraints: Mehrotra predictor-corrector
/// primal-dual interior point, one Riccati factorization per iteration with
/// two vector back-solves (predictor and corrector), common primal-dual step
/// with fraction-to-boundary 0.995. Infeasible start at delta_xi = 0, mu = 0,
/// slacks and bound multipliers at 1. On return the du components are
/// clamped into their bounds exactly.
QpSolution solve_qp(const std::vector<QpStageData>& stages, double tol = 1e-10,
                    int max_iter = 50);

}  // namespace nmpcmc
