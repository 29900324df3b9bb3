#include "nmpcmc/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "nmpcmc/errors.hpp"

namespace nmpcmc {

void merit_weights_update(Vec& sigma, const Vec& mu, bool first_iter) {
    if (first_iter) sigma.assign(mu.size(), 0.0);
    if (sigma.size() != mu.size())
        throw LengthMismatch("merit_weights_update: sigma and mu sizes differ");
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double am = std::fabs(mu[i]);
        sigma[i] = first_iter ? am : std::max(am, 0.5 * (sigma[i] + am));
    }
}

LineSearchResult line_search(const SqpProblem& problem, const Vec& xi, const Vec& delta_xi,
                             const Vec& sigma, const Vec& grad_f, double f0, const Vec& g0,
                             const SqpOptions& opts) {
    if (sigma.size() != g0.size())
        throw LengthMismatch("line_search: sigma and g sizes differ");
    LineSearchResult res;
    double penalty0 = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) penalty0 += sigma[i] * std::fabs(g0[i]);
    res.merit_before = f0 + penalty0;
    res.directional_derivative = dot(grad_f, delta_xi) - penalty0;

    Vec trial(xi.size());
    double alpha = 1.0;
    for (int bt = 0;; ++bt) {
        for (std::size_t i = 0; i < xi.size(); ++i) trial[i] = xi[i] + alpha * delta_xi[i];
        // A trial point that blows up the shooting integration counts as an
        // infinite-merit rejection, not a fatal error.
        double merit = std::numeric_limits<double>::infinity();
        try {
            const double f = problem.objective(trial, nullptr);
            const ConstraintBlocks cb = problem.constraints(trial);
            merit = f;
            for (std::size_t i = 0; i < cb.g.size(); ++i) merit += sigma[i] * std::fabs(cb.g[i]);
        } catch (const NonFiniteState&) {
        }
        ++res.evals;
        const bool ok = std::isfinite(merit) &&
                        merit <= res.merit_before +
                                     opts.c1 * alpha * res.directional_derivative;
        if (ok || bt >= opts.max_backtracks) {
            res.alpha = alpha;
            res.merit_after = merit;
            res.exhausted = !ok;
            return res;
        }
        alpha *= opts.backtrack_factor;
    }
}

bool bfgs_block_update(Matrix& w, const Vec& s, const Vec& y) {
    const int n = w.rows();
    if (w.cols() != n || static_cast<int>(s.size()) != n || static_cast<int>(y.size()) != n)
        throw DimensionMismatch("bfgs_block_update: block and vector sizes differ");
    const double tiny = std::numeric_limits<double>::epsilon();
    const Vec ws = matvec(w, false, s);
    const double sws = dot(s, ws);
    if (!(sws > tiny)) return false;
    const double sy = dot(s, y);
    const double theta = sy >= 0.2 * sws ? 1.0 : 0.8 * sws / (sws - sy);
    Vec r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] =
            theta * y[static_cast<std::size_t>(i)] + (1.0 - theta) * ws[static_cast<std::size_t>(i)];
    const double sr = dot(s, r);
    if (!(std::min(sws, sr) > tiny)) return false;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            w(i, j) += r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(j)] / sr -
                       ws[static_cast<std::size_t>(i)] * ws[static_cast<std::size_t>(j)] / sws;
    symmetrize(w);
    cholesky_factor(w);  // definiteness audit; throws NotPositiveDefinite
    return true;
}

bool check_convergence(const Vec& grad_l, const Vec& g, const Vec& lambda, const Vec& pi_l,
                       const Vec& pi_u, int m_e, int m_l, int m_u, const SqpOptions& opts) {
    const double s_max = 100.0;
    const int m = m_e + m_l + m_u;
    double s_d = 1.0;
    if (m > 0) {
        const double mults = one_norm(lambda) + one_norm(pi_l) + one_norm(pi_u);
        s_d = std::max(s_max, mults / m) / s_max;
    }
    return inf_norm(grad_l) / s_d <= opts.eps && inf_norm(g) <= opts.eps;
}

namespace {

/// h += J_g' lambda for the stage-wise defect jacobian (g_k has +I on
/// x_{k+1}, -dF_dx on x_k, -dF_du on u_k).
void add_constraint_term(const XiLayout& lay, const ConstraintBlocks& cb, const Vec& lambda,
                         Vec& h) {
    for (int k = 0; k < lay.N; ++k) {
        const double* lam = lambda.data() + static_cast<std::size_t>(k) * lay.n_x;
        for (int i = 0; i < lay.n_x; ++i) h[lay.x_offset(k + 1) + i] += lam[i];
        const Matrix& ju = cb.dF_du[static_cast<std::size_t>(k)];
        for (int i = 0; i < lay.n_u; ++i)
            for (int j = 0; j < lay.n_x; ++j) h[lay.u_offset(k) + i] -= ju(j, i) * lam[j];
        if (k >= 1) {
            const Matrix& jx = cb.dF_dx[static_cast<std::size_t>(k)];
            for (int i = 0; i < lay.n_x; ++i)
                for (int j = 0; j < lay.n_x; ++j) h[lay.x_offset(k) + i] -= jx(j, i) * lam[j];
        }
    }
}

Vec lagrangian_gradient(const XiLayout& lay, const Vec& grad_f, const ConstraintBlocks& cb,
                        const Vec& lambda, const Vec& pi_l, const Vec& pi_u) {
    Vec h = grad_f;
    add_constraint_term(lay, cb, lambda, h);
    for (int k = 0; k < lay.N; ++k)
        for (int i = 0; i < lay.n_u; ++i) {
            const std::size_t gi = static_cast<std::size_t>(k) * lay.n_u + i;
            h[lay.u_offset(k) + i] += pi_u[gi] - pi_l[gi];
        }
    return h;
}

std::vector<QpStageData> build_stages(const XiLayout& lay, const std::vector<Matrix>& w,
                                      const Vec& grad_f, const ConstraintBlocks& cb,
                                      const Vec& xi, const Vec& umin, const Vec& umax) {
    std::vector<QpStageData> st(static_cast<std::size_t>(lay.N) + 1);
    for (int k = 0; k < lay.N; ++k) {
        QpStageData& s = st[static_cast<std::size_t>(k)];
        const Matrix& wk = w[static_cast<std::size_t>(k)];
        if (k == 0) {
            s.R = wk;
        } else {
            s.Q = Matrix(lay.n_x, lay.n_x);
            s.M = Matrix(lay.n_x, lay.n_u);
            s.R = Matrix(lay.n_u, lay.n_u);
            for (int j = 0; j < lay.n_x; ++j)
                for (int i = 0; i < lay.n_x; ++i) s.Q(i, j) = wk(i, j);
            for (int j = 0; j < lay.n_u; ++j)
                for (int i = 0; i < lay.n_x; ++i) s.M(i, j) = wk(i, lay.n_x + j);
            for (int j = 0; j < lay.n_u; ++j)
                for (int i = 0; i < lay.n_u; ++i) s.R(i, j) = wk(lay.n_x + i, lay.n_x + j);
            s.q.assign(static_cast<std::size_t>(lay.n_x), 0.0);
            for (int i = 0; i < lay.n_x; ++i) s.q[static_cast<std::size_t>(i)] = grad_f[lay.x_offset(k) + i];
        }
        s.r.assign(static_cast<std::size_t>(lay.n_u), 0.0);
        for (int i = 0; i < lay.n_u; ++i) s.r[static_cast<std::size_t>(i)] = grad_f[lay.u_offset(k) + i];
        s.Jx = cb.dF_dx[static_cast<std::size_t>(k)];
        s.Ju = cb.dF_du[static_cast<std::size_t>(k)];
        s.b = cb.b[static_cast<std::size_t>(k)];
        s.lb.assign(static_cast<std::size_t>(lay.n_u), 0.0);
        s.ub.assign(static_cast<std::size_t>(lay.n_u), 0.0);
        for (int i = 0; i < lay.n_u; ++i) {
            const double u_now = xi[lay.u_offset(k) + i];
            s.lb[static_cast<std::size_t>(i)] = umin[static_cast<std::size_t>(i)] - u_now;
            s.ub[static_cast<std::size_t>(i)] = umax[static_cast<std::size_t>(i)] - u_now;
        }
    }
    st[static_cast<std::size_t>(lay.N)].Q = w[static_cast<std::size_t>(lay.N)];
    st[static_cast<std::size_t>(lay.N)].q.assign(static_cast<std::size_t>(lay.n_x), 0.0);
    for (int i = 0; i < lay.n_x; ++i)
        st[static_cast<std::size_t>(lay.N)].q[static_cast<std::size_t>(i)] =
            grad_f[lay.x_offset(lay.N) + i];
    return st;
}

void reset_blocks(std::vector<Matrix>& w, const XiLayout& lay) {
    w[0] = Matrix::identity(lay.n_u);
    for (int k = 1; k < lay.N; ++k)
        w[static_cast<std::size_t>(k)] = Matrix::identity(lay.n_x + lay.n_u);
    w[static_cast<std::size_t>(lay.N)] = Matrix::identity(lay.n_x);
}

}  // namespace

SqpReport sqp_solve(const SqpProblem& problem, const Vec& xi0, const SqpOptions& opts,
                    const SqpWarmStart& warm) {
    const XiLayout lay = problem.layout();
    if (static_cast<int>(xi0.size()) != lay.size())
        throw LengthMismatch("sqp_solve: xi0 does not match the problem layout");
    const Vec& umin = problem.u_min();
    const Vec& umax = problem.u_max();
    if (static_cast<int>(umin.size()) != lay.n_u || static_cast<int>(umax.size()) != lay.n_u)
        throw LengthMismatch("sqp_solve: bound vectors do not match n_u");
    const int m_e = lay.N * lay.n_x;
    int m_l = 0, m_u = 0;
    for (int i = 0; i < lay.n_u; ++i) {
        if (std::isfinite(umin[static_cast<std::size_t>(i)])) m_l += lay.N;
        if (std::isfinite(umax[static_cast<std::size_t>(i)])) m_u += lay.N;
    }
    const std::size_t n_pi = static_cast<std::size_t>(lay.N) * lay.n_u;

    SqpReport rep;
    rep.xi = xi0;
    rep.lambda.assign(static_cast<std::size_t>(m_e), 0.0);
    rep.pi_l.assign(n_pi, 0.0);
    rep.pi_u.assign(n_pi, 0.0);
    if (!warm.lambda.empty()) {
        if (warm.lambda.size() != static_cast<std::size_t>(m_e))
            throw LengthMismatch("sqp_solve: warm lambda does not match the problem");
        rep.lambda = warm.lambda;
    }
    if (!warm.pi_l.empty() || !warm.pi_u.empty()) {
        if (warm.pi_l.size() != n_pi || warm.pi_u.size() != n_pi)
            throw LengthMismatch("sqp_solve: warm bound multipliers do not match the problem");
        for (std::size_t i = 0; i < n_pi; ++i) {
            rep.pi_l[i] = std::max(0.0, warm.pi_l[i]);
            rep.pi_u[i] = std::max(0.0, warm.pi_u[i]);
        }
    }

    std::vector<Matrix> w(static_cast<std::size_t>(lay.N) + 1);
    reset_blocks(w, lay);
    if (!warm.w_blocks.empty()) {
        if (warm.w_blocks.size() != w.size())
            throw LengthMismatch("sqp_solve: warm Hessian block count does not match the horizon");
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (warm.w_blocks[k].rows() != w[k].rows() || warm.w_blocks[k].cols() != w[k].cols())
                throw LengthMismatch("sqp_solve: warm Hessian block dimensions do not match");
        }
        // Indefinite or otherwise unusable blocks surface as a failed QP,
        // which the salvage path below answers with an identity reset.
        w = warm.w_blocks;
    }

    Vec sigma;
    bool first_merit = true;

    Vec grad_f(static_cast<std::size_t>(lay.size()));
    double f = 0.0;
    ConstraintBlocks cb;
    try {
        f = problem.objective(rep.xi, &grad_f);
        cb = problem.constraints(rep.xi);
    } catch (const NonFiniteState&) {
        // A guess that cannot even be simulated is reported as unconverged
        // rather than thrown: every failure mode lands in the report.
        rep.objective = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }

    for (int iter = 0;; ++iter) {
        const Vec grad_l = lagrangian_gradient(lay, grad_f, cb, rep.lambda, rep.pi_l, rep.pi_u);
        rep.grad_l_inf = inf_norm(grad_l);
        rep.g_inf = inf_norm(cb.g);
        if (check_convergence(grad_l, cb.g, rep.lambda, rep.pi_l, rep.pi_u, m_e, m_l, m_u,
                              opts)) {
            rep.converged = true;
            break;
        }
        if (iter >= opts.max_iter) break;

        SqpIterationLog log;
        log.grad_l_inf = rep.grad_l_inf;
        log.g_inf = rep.g_inf;

        auto stages = build_stages(lay, w, grad_f, cb, rep.xi, umin, umax);
        QpSolution qp = solve_qp(stages, opts.qp_tol, opts.qp_max_iter);
        if (qp.status == QpStatus::Failed) {
            // Salvage attempt: drop the accumulated curvature and retry from
            // identity blocks before giving up.
            reset_blocks(w, lay);
            log.bfgs_reset = true;
            stages = build_stages(lay, w, grad_f, cb, rep.xi, umin, umax);
            qp = solve_qp(stages, opts.qp_tol, opts.qp_max_iter);
            if (qp.status == QpStatus::Failed) {
                rep.qp_failed = true;
                rep.trace.push_back(log);
                break;
            }
        }
        log.qp_iterations = qp.iterations;
        log.qp_status = qp.status;

        // A null subproblem step makes the fresh QP multipliers a KKT
        // certificate for the current iterate; without this check a converged
        // primal point could wait indefinitely for the damped multiplier
        // iterates to catch up.
        const Vec grad_l_fresh =
            lagrangian_gradient(lay, grad_f, cb, qp.mu, qp.nu_l, qp.nu_u);
        if (std::getenv("NMPCMC_SQP_DEBUG") && iter < 3) {
            double dxi_inf = 0, wmax = 0;
            for (double dv : qp.delta_xi) dxi_inf = std::max(dxi_inf, std::fabs(dv));
            for (const auto& wb : w)
                for (int j = 0; j < wb.cols(); ++j)
                    for (int i = 0; i < wb.rows(); ++i) wmax = std::max(wmax, std::fabs(wb(i, j)));
            const double mults = one_norm(qp.mu) + one_norm(qp.nu_l) + one_norm(qp.nu_u);
            const double s_d = std::max(100.0, mults / (m_e + m_l + m_u)) / 100.0;
            std::fprintf(stderr,
                         "[cert] it=%d fresh=%.3e scaled=%.3e thr=%.3e g=%.3e dxi=%.3e wmax=%.3e "
                         "mu_inf=%.3e nu_l_inf=%.3e\n",
                         iter, inf_norm(grad_l_fresh), inf_norm(grad_l_fresh) / s_d, opts.eps,
                         inf_norm(cb.g), dxi_inf, wmax, inf_norm(qp.mu), inf_norm(qp.nu_l));
        }
        if (check_convergence(grad_l_fresh, cb.g, qp.mu, qp.nu_l, qp.nu_u, m_e, m_l, m_u,
                              opts)) {
            rep.lambda = qp.mu;
            rep.pi_l = qp.nu_l;
            rep.pi_u = qp.nu_u;
            rep.grad_l_inf = inf_norm(grad_l_fresh);
            rep.g_inf = inf_norm(cb.g);
            rep.converged = true;
            break;
        }

        merit_weights_update(sigma, qp.mu, first_merit);
        first_merit = false;

        const LineSearchResult ls =
            line_search(problem, rep.xi, qp.delta_xi, sigma, grad_f, f, cb.g, opts);
        log.alpha = ls.alpha;
        log.merit_before = ls.merit_before;
        log.merit_after = ls.merit_after;
        log.directional_derivative = ls.directional_derivative;
        log.ls_evals = ls.evals;
        log.armijo_exhausted = ls.exhausted;

        // An exhausted search whose last trial never produced a finite merit
        // has nowhere sane to go; stop at the current iterate.
        if (ls.exhausted && !std::isfinite(ls.merit_after)) {
            rep.trace.push_back(log);
            break;
        }

        const double a = ls.alpha;
        Vec xi_new(rep.xi.size());
        double step_inf = 0.0;
        for (std::size_t i = 0; i < rep.xi.size(); ++i) {
            const double step = a * qp.delta_xi[i];
            step_inf = std::max(step_inf, std::fabs(step));
            xi_new[i] = rep.xi[i] + step;
        }
        log.step_inf = step_inf;

        // Evaluate before committing so a divergent gradient evaluation
        // cannot leave the report pointing at an unusable iterate.
        Vec grad_f_new(static_cast<std::size_t>(lay.size()));
        double f_new = 0.0;
        ConstraintBlocks cb_new;
        try {
            f_new = problem.objective(xi_new, &grad_f_new);
            cb_new = problem.constraints(xi_new);
        } catch (const NonFiniteState&) {
            rep.trace.push_back(log);
            break;
        }

        rep.xi = std::move(xi_new);
        for (std::size_t i = 0; i < rep.lambda.size(); ++i)
            rep.lambda[i] += a * (qp.mu[i] - rep.lambda[i]);
        for (std::size_t i = 0; i < rep.pi_l.size(); ++i) {
            rep.pi_l[i] += a * (qp.nu_l[i] - rep.pi_l[i]);
            rep.pi_u[i] += a * (qp.nu_u[i] - rep.pi_u[i]);
        }

        // Curvature pairs against the *new* multiplier estimate at both
        // primal points; the bound terms are constant and cancel in y.
        Vec h_old = grad_f;
        add_constraint_term(lay, cb, rep.lambda, h_old);
        Vec h_new = grad_f_new;
        add_constraint_term(lay, cb_new, rep.lambda, h_new);

        auto block_span = [&](int blk, int& off, int& len) {
            if (blk == 0) {
                off = 0;
                len = lay.n_u;
            } else if (blk < lay.N) {
                off = lay.x_offset(blk);
                len = lay.n_x + lay.n_u;
            } else {
                off = lay.x_offset(lay.N);
                len = lay.n_x;
            }
        };
        bool lost_definiteness = false;
        for (int blk = 0; blk <= lay.N && !lost_definiteness; ++blk) {
            int off = 0, len = 0;
            block_span(blk, off, len);
            Vec s(static_cast<std::size_t>(len)), y(static_cast<std::size_t>(len));
            for (int i = 0; i < len; ++i) {
                s[static_cast<std::size_t>(i)] = a * qp.delta_xi[static_cast<std::size_t>(off + i)];
                y[static_cast<std::size_t>(i)] = h_new[static_cast<std::size_t>(off + i)] -
                                                 h_old[static_cast<std::size_t>(off + i)];
            }
            try {
                bfgs_block_update(w[static_cast<std::size_t>(blk)], s, y);
            } catch (const NotPositiveDefinite&) {
                lost_definiteness = true;
            }
        }
        if (lost_definiteness) {
            reset_blocks(w, lay);
            log.bfgs_reset = true;
        }

        f = f_new;
        grad_f = std::move(grad_f_new);
        cb = std::move(cb_new);
        rep.iterations = iter + 1;
        rep.trace.push_back(log);
    }
    rep.objective = f;
    rep.w_blocks = std::move(w);
    return rep;
}

}  // namespace nmpcmc
