#pragma once

#include <vector>

#include "nmpcmc/linalg.hpp"
#include "nmpcmc/ocp.hpp"
#include "nmpcmc/qp.hpp"

namespace nmpcmc {

/// Problem interface consumed by the SQP solver: a smooth objective, the
/// stage-wise shooting defects with their jacobian blocks, and constant box
/// bounds on the inputs. The regulator OCP is one implementation; tests also
/// pose plain QPs through the same interface.
class SqpProblem {
public:
    virtual ~SqpProblem() = default;
    virtual XiLayout layout() const = 0;
    virtual const Vec& u_min() const = 0;
    virtual const Vec& u_max() const = 0;
    /// Objective value; gradient written to *grad (layout().size()) when
    /// grad is non-null.
    virtual double objective(const Vec& xi, Vec* grad) const = 0;
    virtual ConstraintBlocks constraints(const Vec& xi) const = 0;
};

/// Adapter exposing an NlpInstance through the SqpProblem interface.
class OcpProblem final : public SqpProblem {
public:
    explicit OcpProblem(NlpInstance nlp) : nlp_(std::move(nlp)), layout_(layout_of(nlp_)) {}

    XiLayout layout() const override { return layout_; }
    const Vec& u_min() const override { return nlp_.u_min; }
    const Vec& u_max() const override { return nlp_.u_max; }
    double objective(const Vec& xi, Vec* grad) const override {
        auto [phi, g] = eval_objective(nlp_, xi);
        if (grad != nullptr) *grad = std::move(g);
        return phi;
    }
    ConstraintBlocks constraints(const Vec& xi) const override {
        return eval_constraints(nlp_, xi);
    }
    const NlpInstance& nlp() const { return nlp_; }

private:
    NlpInstance nlp_;
    XiLayout layout_;
};

struct SqpOptions {
    double eps = 1e-6;            ///< KKT tolerance (scaled infinity norms)
    int max_iter = 100;
    int max_backtracks = 30;      ///< halvings before the line search gives up
    double c1 = 1e-4;             ///< Armijo sufficient-decrease constant
    double backtrack_factor = 0.5;
    double qp_tol = 1e-12;
    int qp_max_iter = 50;
};

/// Per-iteration audit record. merit_* and directional_derivative refer to
/// the Powell l1 merit T = f + sigma'|g|; an accepted step always satisfies
/// merit_after <= merit_before + c1 * alpha * directional_derivative unless
/// armijo_exhausted is set.
struct SqpIterationLog {
    double alpha = 0.0;
    double merit_before = 0.0;
    double merit_after = 0.0;
    double directional_derivative = 0.0;
    int ls_evals = 0;
    int qp_iterations = 0;
    QpStatus qp_status = QpStatus::Failed;
    bool armijo_exhausted = false;
    bool bfgs_reset = false;
    double grad_l_inf = 0.0;  ///< at iteration start
    double g_inf = 0.0;       ///< at iteration start
    double step_inf = 0.0;    ///< |alpha * delta_xi|_inf
};

struct SqpReport {
    Vec xi;
    Vec lambda;      ///< equality multipliers, stage-ordered
    Vec pi_l, pi_u;  ///< bound multipliers, >= 0
    int iterations = 0;
    bool converged = false;
    bool qp_failed = false;
    double objective = 0.0;
    double grad_l_inf = 0.0;
    double g_inf = 0.0;
    std::vector<Matrix> w_blocks;  ///< final Hessian blocks, reusable as a warm start
    std::vector<SqpIterationLog> trace;
};

/// Powell merit-weight recursion: on the first iteration sigma_i = |mu_i|,
/// afterwards sigma_i = max(|mu_i|, (sigma_i + |mu_i|) / 2).
void merit_weights_update(Vec& sigma, const Vec& mu, bool first_iter);

struct LineSearchResult {
    double alpha = 0.0;
    int evals = 0;
    bool exhausted = false;
    double merit_before = 0.0;
    double merit_after = 0.0;
    double directional_derivative = 0.0;
};

/// Backtracking Armijo search on the l1 merit along delta_xi. f0/g0 are the
/// objective and defect residuals at xi (so the merit at alpha = 0 is not
/// re-evaluated). If max_backtracks halvings all fail the sufficient
/// decrease test, the smallest trial step is returned with exhausted set;
/// the caller continues with it rather than stalling.
LineSearchResult line_search(const SqpProblem& problem, const Vec& xi, const Vec& delta_xi,
                             const Vec& sigma, const Vec& grad_f, double f0, const Vec& g0,
                             const SqpOptions& opts);

/// Damped BFGS update of one diagonal block. Returns false (leaving w
/// untouched) when the step or curvature information is too small to be
/// trustworthy. Throws NotPositiveDefinite if the updated block loses
/// definiteness, which the solver answers by resetting every block.
bool bfgs_block_update(Matrix& w, const Vec& s, const Vec& y);

/// Scaled KKT test: grad_l and g pass at tolerance eps after dividing the
/// stationarity norm by s_d = max(s_max, multiplier 1-norm / m) / s_max with
/// s_max = 100, so huge multipliers do not make an honest stationary point
/// look unconverged.
bool check_convergence(const Vec& grad_l, const Vec& g, const Vec& lambda, const Vec& pi_l,
                       const Vec& pi_u, int m_e, int m_l, int m_u, const SqpOptions& opts);

/// Optional warm start. Empty vectors mean the corresponding multipliers
/// start at zero; nonempty ones must match the problem (lambda: N*n_x, pi:
/// N*n_u) and negative bound multipliers are projected to zero. w_blocks,
/// when nonempty, seeds the Hessian blocks instead of identity; it must
/// hold N+1 blocks with the stage dimensions of the problem.
struct SqpWarmStart {
    Vec lambda;
    Vec pi_l, pi_u;
    std::vector<Matrix> w_blocks;
};

/// Structured SQP with block BFGS Hessian approximation, Riccati
/// interior-point QP subproblems and l1 merit line search. xi0 is the
/// initial primal guess; multipliers start at zero and Hessian blocks at
/// identity unless warm ones are supplied. A receding-horizon caller that
/// re-solves a shifted instance should pass its previous multipliers and
/// Hessian blocks: a near-optimal primal guess paired with zero duals makes
/// the l1 merit price the corrective step at the multiplier scale, and an
/// identity Hessian restart crawls in the weakly curved directions (late
/// inputs barely move the tracking cost), either of which can exhaust the
/// iteration budget. Thread-safe: no global state, everything lives on the
/// stack.
SqpReport sqp_solve(const SqpProblem& problem, const Vec& xi0, const SqpOptions& opts = {},
                    const SqpWarmStart& warm = {});

}  // namespace nmpcmc
