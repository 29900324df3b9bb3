#pragma once

// Dense reference solvers for the structured stage-wise QP, used only by
// tests. The problem is flattened to one big Hessian/jacobian and solved by
// Gaussian elimination; box constraints are handled by brute-force active-set
// enumeration ordered by cardinality. Slow but entirely independent of the
// Riccati/interior-point code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nmpcmc/qp.hpp"
#include "nmpcmc/rng.hpp"
#include "support/dense_oracles.hpp"

namespace oracle {

struct DenseQp {
    int n = 0;    ///< primal variables (decision-vector layout)
    int meq = 0;  ///< equality rows
    int nv = 0;   ///< bounded input components
    Matrix h;
    Vec c;
    Matrix jeq;
    Vec beq;
    Vec lb, ub;              ///< per input component, global index k*n_u + i
    std::vector<int> vcol;   ///< decision-vector column of each input component
};

inline DenseQp densify(const std::vector<nmpcmc::QpStageData>& stages) {
    const int N = static_cast<int>(stages.size()) - 1;
    const int n_u = stages[0].R.rows();
    const int n_x = stages[N].Q.rows();
    const int stride = n_u + n_x;
    DenseQp q;
    q.n = N * stride;
    q.meq = N * n_x;
    q.nv = N * n_u;
    q.h = Matrix(q.n, q.n);
    q.c.assign(static_cast<std::size_t>(q.n), 0.0);
    q.jeq = Matrix(q.meq, q.n);
    q.beq.assign(static_cast<std::size_t>(q.meq), 0.0);
    q.lb.assign(static_cast<std::size_t>(q.nv), 0.0);
    q.ub.assign(static_cast<std::size_t>(q.nv), 0.0);
    q.vcol.resize(static_cast<std::size_t>(q.nv));
    auto uo = [&](int k) { return k * stride; };
    auto xo = [&](int k) { return (k - 1) * stride + n_u; };
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < n_u; ++i) {
            for (int j = 0; j < n_u; ++j) q.h(uo(k) + i, uo(k) + j) += stages[k].R(i, j);
            q.c[uo(k) + i] = stages[k].r[i];
            q.lb[k * n_u + i] = stages[k].lb[i];
            q.ub[k * n_u + i] = stages[k].ub[i];
            q.vcol[k * n_u + i] = uo(k) + i;
        }
        if (k >= 1) {
            for (int i = 0; i < n_x; ++i) {
                for (int j = 0; j < n_x; ++j) q.h(xo(k) + i, xo(k) + j) += stages[k].Q(i, j);
                for (int j = 0; j < n_u; ++j) {
                    q.h(xo(k) + i, uo(k) + j) += stages[k].M(i, j);
                    q.h(uo(k) + j, xo(k) + i) += stages[k].M(i, j);
                }
                q.c[xo(k) + i] = stages[k].q[i];
            }
        }
        for (int i = 0; i < n_x; ++i) {
            q.jeq(k * n_x + i, xo(k + 1) + i) = 1.0;
            for (int j = 0; j < n_u; ++j) q.jeq(k * n_x + i, uo(k) + j) = -stages[k].Ju(i, j);
            if (k >= 1)
                for (int j = 0; j < n_x; ++j) q.jeq(k * n_x + i, xo(k) + j) = -stages[k].Jx(i, j);
            q.beq[k * n_x + i] = stages[k].b[i];
        }
    }
    for (int i = 0; i < n_x; ++i) {
        for (int j = 0; j < n_x; ++j) q.h(xo(N) + i, xo(N) + j) += stages[N].Q(i, j);
        q.c[xo(N) + i] = stages[N].q[i];
    }
    return q;
}

/// Equality-constrained solution (bounds ignored) from the dense KKT system.
inline std::pair<Vec, Vec> solve_eq_qp(const std::vector<nmpcmc::QpStageData>& stages) {
    const DenseQp q = densify(stages);
    const int dim = q.n + q.meq;
    Matrix kkt(dim, dim);
    Matrix rhs(dim, 1);
    for (int i = 0; i < q.n; ++i) {
        for (int j = 0; j < q.n; ++j) kkt(i, j) = q.h(i, j);
        rhs(i, 0) = -q.c[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < q.meq; ++i) {
        for (int j = 0; j < q.n; ++j) {
            kkt(q.n + i, j) = q.jeq(i, j);
            kkt(j, q.n + i) = q.jeq(i, j);
        }
        rhs(q.n + i, 0) = q.beq[static_cast<std::size_t>(i)];
    }
    const Matrix sol = solve(kkt, rhs);
    Vec x(static_cast<std::size_t>(q.n)), mu(static_cast<std::size_t>(q.meq));
    for (int i = 0; i < q.n; ++i) x[static_cast<std::size_t>(i)] = sol(i, 0);
    for (int i = 0; i < q.meq; ++i) mu[static_cast<std::size_t>(i)] = sol(q.n + i, 0);
    return {std::move(x), std::move(mu)};
}

struct BoxQpSolution {
    bool found = false;
    int cardinality = -1;
    Vec x, mu, nu_l, nu_u;
};

/// Exact box-constrained solution by active-set enumeration: try every
/// subset of input components ordered by how many bounds are active, fix the
/// chosen components at their lower or upper bound, solve the equality KKT
/// system, and accept the first candidate that is primal and dual feasible.
/// Strict convexity makes that candidate the unique optimum.
inline BoxQpSolution solve_box_qp(const std::vector<nmpcmc::QpStageData>& stages,
                                  double tol = 1e-9) {
    const DenseQp q = densify(stages);
    if (q.nv > 20) throw std::invalid_argument("solve_box_qp: too many bound components");
    std::vector<std::uint32_t> masks(1u << q.nv);
    for (std::uint32_t i = 0; i < masks.size(); ++i) masks[i] = i;
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        return __builtin_popcount(a) < __builtin_popcount(b);
    });

    BoxQpSolution best;
    for (const std::uint32_t mask : masks) {
        std::vector<int> comps;
        bool viable = true;
        for (int i = 0; i < q.nv; ++i) {
            if (!(mask & (1u << i))) continue;
            if (!std::isfinite(q.lb[static_cast<std::size_t>(i)]) &&
                !std::isfinite(q.ub[static_cast<std::size_t>(i)])) {
                viable = false;
                break;
            }
            comps.push_back(i);
        }
        if (!viable) continue;
        const int card = static_cast<int>(comps.size());

        // Odometer over the lower/upper choice of every active component;
        // components with a single finite side have no choice to make.
        std::vector<int> n_choices(comps.size()), choice(comps.size(), 0);
        for (std::size_t a = 0; a < comps.size(); ++a) {
            const bool has_l = std::isfinite(q.lb[static_cast<std::size_t>(comps[a])]);
            const bool has_u = std::isfinite(q.ub[static_cast<std::size_t>(comps[a])]);
            n_choices[a] = (has_l && has_u) ? 2 : 1;
        }
        bool more = true;
        while (more) {
            std::vector<bool> at_lower(comps.size());
            for (std::size_t a = 0; a < comps.size(); ++a) {
                const bool has_l = std::isfinite(q.lb[static_cast<std::size_t>(comps[a])]);
                at_lower[a] = has_l && (n_choices[a] == 1 || choice[a] == 0);
            }
            const int dim = q.n + q.meq + card;
            Matrix kkt(dim, dim);
            Matrix rhs(dim, 1);
            for (int i = 0; i < q.n; ++i) {
                for (int j = 0; j < q.n; ++j) kkt(i, j) = q.h(i, j);
                rhs(i, 0) = -q.c[static_cast<std::size_t>(i)];
            }
            for (int i = 0; i < q.meq; ++i) {
                for (int j = 0; j < q.n; ++j) {
                    kkt(q.n + i, j) = q.jeq(i, j);
                    kkt(j, q.n + i) = q.jeq(i, j);
                }
                rhs(q.n + i, 0) = q.beq[static_cast<std::size_t>(i)];
            }
            for (int a = 0; a < card; ++a) {
                const int col = q.vcol[static_cast<std::size_t>(comps[static_cast<std::size_t>(a)])];
                kkt(q.n + q.meq + a, col) = 1.0;
                kkt(col, q.n + q.meq + a) = 1.0;
                rhs(q.n + q.meq + a, 0) =
                    at_lower[static_cast<std::size_t>(a)]
                        ? q.lb[static_cast<std::size_t>(comps[static_cast<std::size_t>(a)])]
                        : q.ub[static_cast<std::size_t>(comps[static_cast<std::size_t>(a)])];
            }
            const Matrix sol = solve(kkt, rhs);

            bool ok = true;
            for (int i = 0; i < q.nv && ok; ++i) {
                if (mask & (1u << i)) continue;
                const double v = sol(q.vcol[static_cast<std::size_t>(i)], 0);
                if (v < q.lb[static_cast<std::size_t>(i)] - tol ||
                    v > q.ub[static_cast<std::size_t>(i)] + tol)
                    ok = false;
            }
            for (int a = 0; a < card && ok; ++a) {
                const double eta = sol(q.n + q.meq + a, 0);
                if (at_lower[static_cast<std::size_t>(a)] ? (eta > tol) : (eta < -tol)) ok = false;
            }
            if (ok) {
                best.found = true;
                best.cardinality = card;
                best.x.assign(static_cast<std::size_t>(q.n), 0.0);
                best.mu.assign(static_cast<std::size_t>(q.meq), 0.0);
                best.nu_l.assign(static_cast<std::size_t>(q.nv), 0.0);
                best.nu_u.assign(static_cast<std::size_t>(q.nv), 0.0);
                for (int i = 0; i < q.n; ++i) best.x[static_cast<std::size_t>(i)] = sol(i, 0);
                for (int i = 0; i < q.meq; ++i)
                    best.mu[static_cast<std::size_t>(i)] = sol(q.n + i, 0);
                for (int a = 0; a < card; ++a) {
                    const double eta = sol(q.n + q.meq + a, 0);
                    const std::size_t ci = static_cast<std::size_t>(comps[static_cast<std::size_t>(a)]);
                    if (at_lower[static_cast<std::size_t>(a)])
                        best.nu_l[ci] = std::max(0.0, -eta);
                    else
                        best.nu_u[ci] = std::max(0.0, eta);
                }
                return best;
            }
            // advance odometer
            more = false;
            for (std::size_t a = 0; a < choice.size(); ++a) {
                if (++choice[a] < n_choices[a]) {
                    more = true;
                    break;
                }
                choice[a] = 0;
            }
        }
    }
    return best;
}

/// Random strictly convex stage-wise QP with box bounds tight enough that a
/// few of them are typically active at the optimum. Occasionally leaves a
/// side unbounded to exercise the infinite-bound masking.
inline std::vector<nmpcmc::QpStageData> random_qp_instance(nmpcmc::CounterRng& rng, int N,
                                                           int n_x, int n_u,
                                                           bool allow_infinite = true) {
    const double inf = std::numeric_limits<double>::infinity();
    auto rand_mat = [&](int r, int c, double scale) {
        Matrix m(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) m(i, j) = scale * (2.0 * rng.uniform() - 1.0);
        return m;
    };
    auto rand_spd = [&](int n) {
        const Matrix g = rand_mat(n, n, 1.0);
        Matrix s = mul(g.transposed(), g);
        for (int i = 0; i < n; ++i) s(i, i) += 0.3;
        return s;
    };
    auto rand_vec = [&](int n, double scale) {
        Vec v(static_cast<std::size_t>(n));
        for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
        return v;
    };
    std::vector<nmpcmc::QpStageData> stages(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k < N; ++k) {
        nmpcmc::QpStageData& s = stages[static_cast<std::size_t>(k)];
        if (k >= 1) {
            Matrix full = rand_spd(n_x + n_u);
            s.Q = Matrix(n_x, n_x);
            s.M = Matrix(n_x, n_u);
            s.R = Matrix(n_u, n_u);
            for (int i = 0; i < n_x; ++i)
                for (int j = 0; j < n_x; ++j) s.Q(i, j) = full(i, j);
            for (int i = 0; i < n_x; ++i)
                for (int j = 0; j < n_u; ++j) s.M(i, j) = full(i, n_x + j);
            for (int i = 0; i < n_u; ++i)
                for (int j = 0; j < n_u; ++j) s.R(i, j) = full(n_x + i, n_x + j);
            s.q = rand_vec(n_x, 1.0);
            s.Jx = rand_mat(n_x, n_x, 0.7);
        } else {
            s.R = rand_spd(n_u);
        }
        s.r = rand_vec(n_u, 1.5);
        s.Ju = rand_mat(n_x, n_u, 0.7);
        s.b = rand_vec(n_x, 1.0);
        s.lb.assign(static_cast<std::size_t>(n_u), 0.0);
        s.ub.assign(static_cast<std::size_t>(n_u), 0.0);
        for (int i = 0; i < n_u; ++i) {
            s.lb[static_cast<std::size_t>(i)] = -(0.1 + 0.6 * rng.uniform());
            s.ub[static_cast<std::size_t>(i)] = 0.1 + 0.6 * rng.uniform();
            if (allow_infinite && rng.uniform() < 0.12) s.lb[static_cast<std::size_t>(i)] = -inf;
            if (allow_infinite && rng.uniform() < 0.12) s.ub[static_cast<std::size_t>(i)] = inf;
        }
    }
    stages[static_cast<std::size_t>(N)].Q = rand_spd(n_x);
    stages[static_cast<std::size_t>(N)].q = rand_vec(n_x, 1.0);
    return stages;
}

}  // namespace oracle
