#include "nmpcmc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "nmpcmc/errors.hpp"

namespace nmpcmc {

namespace {

struct Dims {
    int N = 0;
    int n_x = 0;
    int n_u = 0;
};

Dims validate(const std::vector<QpStageData>& stages) {
    if (stages.size() < 2)
        throw DimensionMismatch("QP needs at least two stages (one input, one terminal state)");
    Dims d;
    d.N = static_cast<int>(stages.size()) - 1;
    d.n_u = stages[0].R.rows();
    d.n_x = stages[d.N].Q.rows();
    if (d.n_u <= 0 || d.n_x <= 0)
        throw DimensionMismatch("QP stage blocks must have positive dimensions");
    auto bad = [](int k, const char* what) {
        throw DimensionMismatch("QP stage " + std::to_string(k) + ": inconsistent " + what);
    };
    for (int k = 0; k < d.N; ++k) {
        const QpStageData& s = stages[k];
        if (s.R.rows() != d.n_u || s.R.cols() != d.n_u || static_cast<int>(s.r.size()) != d.n_u)
            bad(k, "R/r");
        if (s.Ju.rows() != d.n_x || s.Ju.cols() != d.n_u) bad(k, "Ju");
        if (static_cast<int>(s.b.size()) != d.n_x) bad(k, "b");
        if (static_cast<int>(s.lb.size()) != d.n_u || static_cast<int>(s.ub.size()) != d.n_u)
            bad(k, "bounds");
        if (k >= 1) {
            if (s.Q.rows() != d.n_x || s.Q.cols() != d.n_x ||
                static_cast<int>(s.q.size()) != d.n_x)
                bad(k, "Q/q");
            if (s.M.rows() != d.n_x || s.M.cols() != d.n_u) bad(k, "M");
            if (s.Jx.rows() != d.n_x || s.Jx.cols() != d.n_x) bad(k, "Jx");
        }
    }
    const QpStageData& last = stages[d.N];
    if (last.Q.rows() != d.n_x || last.Q.cols() != d.n_x ||
        static_cast<int>(last.q.size()) != d.n_x)
        bad(d.N, "terminal Q/q");
    return d;
}

int u_off(const Dims& d, int k) { return k * (d.n_u + d.n_x); }
int x_off(const Dims& d, int k) { return (k - 1) * (d.n_u + d.n_x) + d.n_u; }

Vec seg(const Vec& v, int off, int n) {
    return Vec(v.begin() + off, v.begin() + off + n);
}

/// Matrix part of the backward Riccati sweep. Depends on the quadratic
/// blocks only, so for a fixed barrier diagonal it is computed once and
/// reused for any number of right-hand sides.
struct RiccatiFactor {
    std::vector<Matrix> chol_h;  ///< lower factors of H_k = R_k + Ju' P_{k+1} Ju, k = 0..N-1
    std::vector<Matrix> gain;    ///< feedback gains K_k = -H_k^{-1} G_k, k = 1..N-1
    std::vector<Matrix> gmat;    ///< G_k = M_k' + Ju' P_{k+1} Jx, k = 1..N-1
    std::vector<Matrix> value;   ///< value Hessians P_k, k = 1..N
};

RiccatiFactor riccati_factor(const std::vector<QpStageData>& stages, const Dims& d,
                             const Vec* barrier_diag) {
    RiccatiFactor f;
    f.chol_h.resize(d.N);
    f.gain.resize(d.N);
    f.gmat.resize(d.N);
    f.value.resize(d.N + 1);
    f.value[d.N] = stages[d.N].Q;
    for (int k = d.N - 1; k >= 0; --k) {
        const QpStageData& s = stages[k];
        const Matrix& p_next = f.value[k + 1];
        Matrix pju = gemm(1.0, p_next, false, s.Ju, false, 0.0, Matrix());
        Matrix h = gemm(1.0, s.Ju, true, pju, false, 0.0, Matrix());
        for (int j = 0; j < d.n_u; ++j)
            for (int i = 0; i < d.n_u; ++i) h(i, j) += s.R(i, j);
        if (barrier_diag != nullptr)
            for (int i = 0; i < d.n_u; ++i) h(i, i) += (*barrier_diag)[k * d.n_u + i];
        symmetrize(h);
        f.chol_h[k] = cholesky_factor(h);
        if (k >= 1) {
            Matrix pjx = gemm(1.0, p_next, false, s.Jx, false, 0.0, Matrix());
            Matrix g = gemm(1.0, s.Ju, true, pjx, false, 0.0, Matrix());
            for (int j = 0; j < d.n_x; ++j)
                for (int i = 0; i < d.n_u; ++i) g(i, j) += s.M(j, i);
            Matrix gain = cholesky_solve(f.chol_h[k], g);
            for (std::size_t idx = 0; idx < gain.size(); ++idx) gain.data()[idx] = -gain.data()[idx];
            Matrix p = gemm(1.0, s.Jx, true, pjx, false, 0.0, Matrix());
            for (int j = 0; j < d.n_x; ++j)
                for (int i = 0; i < d.n_x; ++i) p(i, j) += s.Q(i, j);
            p = gemm(1.0, g, true, gain, false, 1.0, p);
            symmetrize(p);
            f.value[k] = std::move(p);
            f.gain[k] = std::move(gain);
            f.gmat[k] = std::move(g);
        }
    }
    return f;
}

/// Vector part: backward value-gradient sweep plus forward rollout for the
/// right-hand sides (rhat: input rows, qhat: state rows, bhat: dynamics
/// offsets). Writes the step in decision-vector layout and the equality
/// multipliers mu_k = -(P_{k+1} dx_{k+1} + p_{k+1}).
void riccati_solve_vectors(const std::vector<QpStageData>& stages, const Dims& d,
                           const RiccatiFactor& f, const std::vector<Vec>& rhat,
                           const std::vector<Vec>& qhat, const std::vector<Vec>& bhat,
                           Vec& dxi, Vec& dmu) {
    std::vector<Vec> pvec(d.N + 1);
    std::vector<Vec> dff(d.N);
    pvec[d.N] = qhat[d.N];
    for (int k = d.N - 1; k >= 0; --k) {
        const QpStageData& s = stages[k];
        Vec tmp = pvec[k + 1];
        gemv_into(1.0, f.value[k + 1], false, bhat[k], 1.0, tmp);
        Vec h = rhat[k];
        gemv_into(1.0, s.Ju, true, tmp, 1.0, h);
        cholesky_solve_in_place(f.chol_h[k], h);
        for (double& v : h) v = -v;
        dff[k] = std::move(h);
        if (k >= 1) {
            Vec p = qhat[k];
            gemv_into(1.0, s.Jx, true, tmp, 1.0, p);
            gemv_into(1.0, f.gmat[k], true, dff[k], 1.0, p);
            pvec[k] = std::move(p);
        }
    }
    dxi.assign(static_cast<std::size_t>(d.N) * (d.n_u + d.n_x), 0.0);
    dmu.assign(static_cast<std::size_t>(d.N) * d.n_x, 0.0);
    Vec dx(d.n_x, 0.0);
    for (int k = 0; k < d.N; ++k) {
        Vec du = dff[k];
        if (k >= 1) gemv_into(1.0, f.gain[k], false, dx, 1.0, du);
        std::copy(du.begin(), du.end(), dxi.begin() + u_off(d, k));
        Vec dx_next = bhat[k];
        if (k >= 1) gemv_into(1.0, stages[k].Jx, false, dx, 1.0, dx_next);
        gemv_into(1.0, stages[k].Ju, false, du, 1.0, dx_next);
        dx = std::move(dx_next);
        std::copy(dx.begin(), dx.end(), dxi.begin() + x_off(d, k + 1));
        Vec m = pvec[k + 1];
        gemv_into(1.0, f.value[k + 1], false, dx, 1.0, m);
        for (int i = 0; i < d.n_x; ++i) dmu[static_cast<std::size_t>(k) * d.n_x + i] = -m[i];
    }
}

}  // namespace

std::pair<Vec, Vec> riccati_factor_solve(const std::vector<QpStageData>& stages) {
    const Dims d = validate(stages);
    const RiccatiFactor f = riccati_factor(stages, d, nullptr);
    std::vector<Vec> rhat(d.N), qhat(d.N + 1), bhat(d.N);
    for (int k = 0; k < d.N; ++k) {
        rhat[k] = stages[k].r;
        bhat[k] = stages[k].b;
    }
    for (int k = 1; k <= d.N; ++k) qhat[k] = stages[k].q;
    Vec dxi, dmu;
    riccati_solve_vectors(stages, d, f, rhat, qhat, bhat, dxi, dmu);
    return {std::move(dxi), std::move(dmu)};
}

QpSolution solve_qp(const std::vector<QpStageData>& stages, double tol, int max_iter) {
    const Dims d = validate(stages);
    const int nv = d.N * d.n_u;
    const double tau = 0.995;

    // Finite-bound bookkeeping: infinite bounds carry no slack, no
    // multiplier and no barrier contribution.
    std::vector<char> fin_l(nv, 0), fin_u(nv, 0);
    Vec lb(nv), ub(nv);
    int m = 0;
    double data_scale = 1.0;
    for (int k = 0; k < d.N; ++k) {
        for (int i = 0; i < d.n_u; ++i) {
            const int idx = k * d.n_u + i;
            lb[idx] = stages[k].lb[i];
            ub[idx] = stages[k].ub[i];
            if (lb[idx] > ub[idx])
                throw DomainError("QP stage " + std::to_string(k) + ": lower bound exceeds upper");
            if (std::isfinite(lb[idx])) {
                fin_l[idx] = 1;
                ++m;
                data_scale = std::max(data_scale, std::fabs(lb[idx]));
            }
            if (std::isfinite(ub[idx])) {
                fin_u[idx] = 1;
                ++m;
                data_scale = std::max(data_scale, std::fabs(ub[idx]));
            }
        }
        data_scale = std::max(data_scale, inf_norm(stages[k].r));
        data_scale = std::max(data_scale, inf_norm(stages[k].b));
    }
    for (int k = 1; k <= d.N; ++k) data_scale = std::max(data_scale, inf_norm(stages[k].q));
    const double eps = tol * data_scale;

    QpSolution sol;
    sol.delta_xi.assign(static_cast<std::size_t>(d.N) * (d.n_u + d.n_x), 0.0);
    sol.mu.assign(static_cast<std::size_t>(d.N) * d.n_x, 0.0);
    // Slacks start at the distance to each bound (floored at one) so that wide
    // boxes do not begin with a large bound infeasibility, which would feed an
    // oversized second-order term into the corrector.
    Vec sl(nv, 0.0), su(nv, 0.0), nl(nv, 0.0), nu(nv, 0.0);
    for (int idx = 0; idx < nv; ++idx) {
        const int k = idx / d.n_u;
        const int i = idx % d.n_u;
        if (fin_l[idx]) {
            sl[idx] = std::max(1.0, std::fabs(stages[k].lb[i]));
            nl[idx] = 1.0;
        }
        if (fin_u[idx]) {
            su[idx] = std::max(1.0, std::fabs(stages[k].ub[i]));
            nu[idx] = 1.0;
        }
    }

    std::vector<Vec> rhat(d.N), qhat(d.N + 1), bhat(d.N);
    Vec r_stat(sol.delta_xi.size());
    Vec r_dyn(sol.mu.size());
    Vec rl(nv, 0.0), ru(nv, 0.0);
    Vec rc_l(nv, 0.0), rc_u(nv, 0.0);
    Vec dsl(nv, 0.0), dsu(nv, 0.0), dnl(nv, 0.0), dnu(nv, 0.0);

    // Stationarity, dynamics and slack-consistency residuals at the current
    // iterate, written into r_stat / r_dyn / rl / ru.
    auto residuals = [&]() {
        for (int k = 0; k < d.N; ++k) {
            const QpStageData& s = stages[k];
            const Vec vk = seg(sol.delta_xi, u_off(d, k), d.n_u);
            const Vec muk = seg(sol.mu, k * d.n_x, d.n_x);
            Vec ru_row = s.r;
            gemv_into(1.0, s.R, false, vk, 1.0, ru_row);
            if (k >= 1) {
                const Vec xk = seg(sol.delta_xi, x_off(d, k), d.n_x);
                gemv_into(1.0, s.M, true, xk, 1.0, ru_row);
            }
            gemv_into(-1.0, s.Ju, true, muk, 1.0, ru_row);
            for (int i = 0; i < d.n_u; ++i) {
                const int idx = k * d.n_u + i;
                ru_row[i] += nu[idx] - nl[idx];
                r_stat[u_off(d, k) + i] = ru_row[i];
            }
            // dynamics residual for the step to stage k+1
            Vec rd = seg(sol.delta_xi, x_off(d, k + 1), d.n_x);
            axpy(-1.0, s.b, rd);
            if (k >= 1) {
                const Vec xk = seg(sol.delta_xi, x_off(d, k), d.n_x);
                gemv_into(-1.0, s.Jx, false, xk, 1.0, rd);
            }
            gemv_into(-1.0, s.Ju, false, vk, 1.0, rd);
            std::copy(rd.begin(), rd.end(), r_dyn.begin() + static_cast<std::size_t>(k) * d.n_x);
        }
        for (int k = 1; k <= d.N; ++k) {
            const QpStageData& s = stages[k];
            const Vec xk = seg(sol.delta_xi, x_off(d, k), d.n_x);
            Vec rx = s.q;
            gemv_into(1.0, s.Q, false, xk, 1.0, rx);
            if (k < d.N) {
                const Vec vk = seg(sol.delta_xi, u_off(d, k), d.n_u);
                const Vec muk = seg(sol.mu, k * d.n_x, d.n_x);
                gemv_into(1.0, s.M, false, vk, 1.0, rx);
                gemv_into(-1.0, s.Jx, true, muk, 1.0, rx);
            }
            for (int i = 0; i < d.n_x; ++i) rx[i] += sol.mu[static_cast<std::size_t>(k - 1) * d.n_x + i];
            std::copy(rx.begin(), rx.end(), r_stat.begin() + x_off(d, k));
        }
        for (int idx = 0; idx < nv; ++idx) {
            const int k = idx / d.n_u;
            const double v = sol.delta_xi[u_off(d, k) + idx % d.n_u];
            rl[idx] = fin_l[idx] ? v - sl[idx] - lb[idx] : 0.0;
            ru[idx] = fin_u[idx] ? ub[idx] - v - su[idx] : 0.0;
        }
    };

    // Condense the complementarity rows onto the input rows and solve the
    // remaining equality-constrained system with the cached factorization.
    auto condensed_solve = [&](const RiccatiFactor& f, Vec& dxi, Vec& dmu) {
        for (int k = 0; k < d.N; ++k) {
            Vec rr(d.n_u);
            for (int i = 0; i < d.n_u; ++i) {
                const int idx = k * d.n_u + i;
                double val = r_stat[u_off(d, k) + i];
                if (fin_l[idx]) val -= (rc_l[idx] - nl[idx] * rl[idx]) / sl[idx];
                if (fin_u[idx]) val += (rc_u[idx] - nu[idx] * ru[idx]) / su[idx];
                rr[i] = val;
            }
            rhat[k] = std::move(rr);
            Vec bb = seg(r_dyn, k * d.n_x, d.n_x);
            for (double& v : bb) v = -v;
            bhat[k] = std::move(bb);
        }
        for (int k = 1; k <= d.N; ++k) qhat[k] = seg(r_stat, x_off(d, k), d.n_x);
        riccati_solve_vectors(stages, d, f, rhat, qhat, bhat, dxi, dmu);
    };

    // Recover slack and multiplier directions from an input-space step.
    auto expand = [&](const Vec& dxi) {
        for (int idx = 0; idx < nv; ++idx) {
            const int k = idx / d.n_u;
            const double dv = dxi[u_off(d, k) + idx % d.n_u];
            dsl[idx] = fin_l[idx] ? dv + rl[idx] : 0.0;
            dsu[idx] = fin_u[idx] ? ru[idx] - dv : 0.0;
            dnl[idx] = fin_l[idx] ? (rc_l[idx] - nl[idx] * dsl[idx]) / sl[idx] : 0.0;
            dnu[idx] = fin_u[idx] ? (rc_u[idx] - nu[idx] * dsu[idx]) / su[idx] : 0.0;
        }
    };

    // Largest step keeping every slack and multiplier nonnegative, scaled by
    // the fraction-to-boundary factor (1.0 for the affine probe).
    auto max_step = [&](double frac) {
        double alpha = 1.0;
        auto cap = [&](double val, double dir) {
            if (dir < 0.0) alpha = std::min(alpha, -frac * val / dir);
        };
        for (int idx = 0; idx < nv; ++idx) {
            if (fin_l[idx]) {
                cap(sl[idx], dsl[idx]);
                cap(nl[idx], dnl[idx]);
            }
            if (fin_u[idx]) {
                cap(su[idx], dsu[idx]);
                cap(nu[idx], dnu[idx]);
            }
        }
        return alpha;
    };

    Vec dxi(sol.delta_xi.size()), dmu(sol.mu.size());
    for (int iter = 0;; ++iter) {
        residuals();
        const double gap = m > 0 ? (dot(sl, nl) + dot(su, nu)) / m : 0.0;
        if (inf_norm(r_stat) <= eps && inf_norm(r_dyn) <= eps && inf_norm(rl) <= eps &&
            inf_norm(ru) <= eps && gap <= eps) {
            sol.status = QpStatus::Optimal;
            break;
        }
        if (iter >= max_iter) {
            sol.status = QpStatus::MaxIter;
            break;
        }

        Vec barrier(nv, 0.0);
        for (int idx = 0; idx < nv; ++idx) {
            if (fin_l[idx]) barrier[idx] += nl[idx] / sl[idx];
            if (fin_u[idx]) barrier[idx] += nu[idx] / su[idx];
        }
        RiccatiFactor f;
        try {
            f = riccati_factor(stages, d, &barrier);
        } catch (const NotPositiveDefinite&) {
            sol.status = QpStatus::Failed;
            break;
        }

        // Affine predictor: pure Newton step on the perturbed system.
        for (int idx = 0; idx < nv; ++idx) {
            rc_l[idx] = fin_l[idx] ? -sl[idx] * nl[idx] : 0.0;
            rc_u[idx] = fin_u[idx] ? -su[idx] * nu[idx] : 0.0;
        }
        condensed_solve(f, dxi, dmu);
        expand(dxi);
        double sigma = 0.0;
        if (m > 0 && gap > 0.0) {
            const double alpha_aff = max_step(1.0);
            double gap_aff = 0.0;
            for (int idx = 0; idx < nv; ++idx) {
                if (fin_l[idx])
                    gap_aff += (sl[idx] + alpha_aff * dsl[idx]) * (nl[idx] + alpha_aff * dnl[idx]);
                if (fin_u[idx])
                    gap_aff += (su[idx] + alpha_aff * dsu[idx]) * (nu[idx] + alpha_aff * dnu[idx]);
            }
            gap_aff /= m;
            const double ratio = std::max(0.0, gap_aff / gap);
            sigma = std::min(1.0, ratio * ratio * ratio);
        }

        // Corrector: recenter towards sigma*gap and compensate the
        // second-order term ds*dn of the affine step.
        for (int idx = 0; idx < nv; ++idx) {
            if (fin_l[idx]) rc_l[idx] = sigma * gap - sl[idx] * nl[idx] - dsl[idx] * dnl[idx];
            if (fin_u[idx]) rc_u[idx] = sigma * gap - su[idx] * nu[idx] - dsu[idx] * dnu[idx];
        }
        condensed_solve(f, dxi, dmu);
        expand(dxi);

        const double alpha = max_step(tau);
        axpy(alpha, dxi, sol.delta_xi);
        axpy(alpha, dmu, sol.mu);
        for (int idx = 0; idx < nv; ++idx) {
            if (fin_l[idx]) {
                sl[idx] += alpha * dsl[idx];
                nl[idx] += alpha * dnl[idx];
            }
            if (fin_u[idx]) {
                su[idx] += alpha * dsu[idx];
                nu[idx] += alpha * dnu[idx];
            }
        }
        sol.iterations = iter + 1;
    }

    // Exact bound feasibility of the returned step.
    for (int k = 0; k < d.N; ++k) {
        for (int i = 0; i < d.n_u; ++i) {
            double& v = sol.delta_xi[u_off(d, k) + i];
            v = std::min(std::max(v, stages[k].lb[i]), stages[k].ub[i]);
        }
    }
    sol.nu_l = nl;
    sol.nu_u = nu;
    return sol;
}

}  // namespace nmpcmc
