#include "nmpcmc/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "nmpcmc/errors.hpp"

namespace nmpcmc {

PiStepResult pi_step(const PiState& state, double y_k, double y_bar_k) {
    PiStepResult r;
    r.e = y_bar_k - y_k;
    r.P = state.kP * r.e;
    r.I = state.I_hat + state.Ts * state.kI * r.e;
    r.u_hat = state.u_bar + r.P + r.I;
    r.u = std::max(state.u_min, std::min(state.u_max, r.u_hat));
    r.I_aw = state.Ts * state.kaw * (r.u_hat - r.u);
    r.next = state;
    r.next.I_hat = r.I + r.I_aw;
    return r;
}

NmpcState make_nmpc_state(Model model, const Horizon& horizon, Vec u_min, Vec u_max, Matrix qz,
                          Matrix r, const Vec& x0_hat, const Matrix& p0, int np,
                          const SqpOptions& sqp) {
    if (horizon.N <= 0 || horizon.Ts <= 0.0 || horizon.Nc <= 0 || np <= 0)
        throw DomainError("make_nmpc_state: horizon and step counts must be positive");
    if (static_cast<int>(u_min.size()) != model.n_u || static_cast<int>(u_max.size()) != model.n_u)
        throw LengthMismatch("make_nmpc_state: bound sizes must match the input dimension");
    if (static_cast<int>(x0_hat.size()) != model.n_x || p0.rows() != model.n_x ||
        p0.cols() != model.n_x)
        throw LengthMismatch("make_nmpc_state: filter prior sizes must match the state dimension");

    NmpcState st;
    st.model = std::move(model);
    st.horizon = horizon;
    st.u_min = std::move(u_min);
    st.u_max = std::move(u_max);
    st.Qz = std::move(qz);
    st.R = std::move(r);
    st.np = np;
    st.sqp = sqp;
    st.filter.x_hat = x0_hat;
    st.filter.P = p0;
    return st;
}

namespace {

double clamp_component(double u, double lo, double hi) {
    return std::max(lo, std::min(hi, u));
}

/// Nominal input for cold starts: the midpoint of the box where both sides
/// are finite, otherwise zero pushed inside.
Vec nominal_input(const Vec& lo, const Vec& hi) {
    Vec u(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const bool fl = std::isfinite(lo[i]);
        const bool fh = std::isfinite(hi[i]);
        u[i] = fl && fh ? 0.5 * (lo[i] + hi[i]) : clamp_component(0.0, lo[i], hi[i]);
    }
    return u;
}

/// Input sequence of the previous solution shifted one stage forward, with
/// the final stage repeated and every entry clipped into the box.
std::vector<Vec> shifted_inputs(const Vec& prev, const XiLayout& lay, const Vec& lo,
                                const Vec& hi) {
    std::vector<Vec> u_seq(static_cast<std::size_t>(lay.N),
                           Vec(static_cast<std::size_t>(lay.n_u)));
    for (int k = 0; k < lay.N; ++k) {
        const int src = std::min(k + 1, lay.N - 1);
        for (int i = 0; i < lay.n_u; ++i)
            u_seq[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                clamp_component(prev[static_cast<std::size_t>(lay.u_offset(src) + i)],
                                lo[static_cast<std::size_t>(i)],
                                hi[static_cast<std::size_t>(i)]);
    }
    return u_seq;
}

/// Shift a stage-ordered multiplier vector one stage forward, repeating the
/// final block. Receding-horizon continuation for the dual variables.
Vec shifted_multipliers(const Vec& prev, int block) {
    if (prev.size() < static_cast<std::size_t>(2 * block)) return prev;
    Vec out(prev.size());
    std::copy(prev.begin() + block, prev.end(), out.begin());
    std::copy(prev.end() - block, prev.end(), out.end() - block);
    return out;
}

/// Shift the previous solution one stage forward, repeat its last stage and
/// clip the input slots into the box.
Vec shifted_warm_start(const Vec& prev, const XiLayout& lay, const Vec& lo, const Vec& hi) {
    const std::size_t stage = static_cast<std::size_t>(lay.n_u + lay.n_x);
    Vec xi(prev.size());
    std::copy(prev.begin() + static_cast<std::ptrdiff_t>(stage), prev.end(), xi.begin());
    std::copy(prev.end() - static_cast<std::ptrdiff_t>(stage), prev.end(),
              xi.end() - static_cast<std::ptrdiff_t>(stage));
    for (int k = 0; k < lay.N; ++k)
        for (int i = 0; i < lay.n_u; ++i) {
            double& u = xi[static_cast<std::size_t>(lay.u_offset(k) + i)];
            u = clamp_component(u, lo[static_cast<std::size_t>(i)],
                                hi[static_cast<std::size_t>(i)]);
        }
    return xi;
}

}  // namespace

Vec nmpc_step(NmpcState& state, double t_i, const Vec& y_i, const std::vector<Vec>& setpoints,
              const Vec& d, NmpcDiagnostics* diag) {
    if (!all_finite(y_i)) throw NonFiniteState("nmpc_step: measurement is not finite");
    if (static_cast<int>(y_i.size()) != state.model.n_y)
        throw LengthMismatch("nmpc_step: measurement size must match the model");
    if (static_cast<int>(setpoints.size()) != state.horizon.N)
        throw LengthMismatch("nmpc_step: one setpoint per stage is required");

    std::pair<FilterState, FilterUpdateReport> up;
    try {
        up = filter_update(t_i, state.filter.x_hat, state.filter.P, y_i, state.R, state.model);
    } catch (const NotPositiveDefinite&) {
        // Noise-free measurements can collapse P to zero, making the
        // innovation covariance exactly singular; a vanishing jitter keeps
        // the update defined without visibly perturbing the estimate.
        Matrix r_jittered = state.R;
        for (int i = 0; i < r_jittered.rows(); ++i) r_jittered(i, i) += 1e-10;
        up = filter_update(t_i, state.filter.x_hat, state.filter.P, y_i, r_jittered, state.model);
    }

    NlpInstance nlp;
    nlp.horizon = state.horizon;
    nlp.model = state.model;
    nlp.t0 = t_i;
    nlp.x0 = up.first.x_hat;
    nlp.u_min = state.u_min;
    nlp.u_max = state.u_max;
    if (!d.empty()) nlp.d_seq.assign(static_cast<std::size_t>(state.horizon.N), d);
    nlp.setpoints = setpoints;
    nlp.Qz = state.Qz;
    const OcpProblem problem(std::move(nlp));
    const XiLayout lay = problem.layout();

    Vec xi0;
    SqpWarmStart duals;
    const bool warm = static_cast<int>(state.last_xi.size()) == lay.size();
    if (warm) {
        // Re-shoot the shifted input plan from the fresh estimate so the
        // solver starts dynamically feasible, and continue the shifted dual
        // estimates with it. Carrying a stale defect or zeroed multipliers
        // into a near-optimal guess makes the merit function price the
        // remaining correction at the multiplier scale, which can reject it
        // forever.
        const std::vector<Vec> u_seq =
            shifted_inputs(state.last_xi, lay, state.u_min, state.u_max);
        try {
            xi0 = xi_from_inputs(problem.nlp(), u_seq);
        } catch (const NonFiniteState&) {
            xi0 = shifted_warm_start(state.last_xi, lay, state.u_min, state.u_max);
        }
        duals.lambda = shifted_multipliers(state.last_duals.lambda, lay.n_x);
        duals.pi_l = shifted_multipliers(state.last_duals.pi_l, lay.n_u);
        duals.pi_u = shifted_multipliers(state.last_duals.pi_u, lay.n_u);
    } else {
        const Vec u_nom = nominal_input(state.u_min, state.u_max);
        try {
            xi0 = xi_from_inputs(problem.nlp(), std::vector<Vec>(
                                                    static_cast<std::size_t>(state.horizon.N),
                                                    u_nom));
        } catch (const NonFiniteState&) {
            // Shooting the nominal input can blow up far from equilibrium; a
            // flat guess is always finite and lets the solver take over.
            xi0.assign(static_cast<std::size_t>(lay.size()), 0.0);
            for (int k = 0; k < lay.N; ++k) {
                for (int i = 0; i < lay.n_u; ++i)
                    xi0[static_cast<std::size_t>(lay.u_offset(k) + i)] =
                        u_nom[static_cast<std::size_t>(i)];
                for (int i = 0; i < lay.n_x; ++i)
                    xi0[static_cast<std::size_t>(lay.x_offset(k + 1) + i)] =
                        problem.nlp().x0[static_cast<std::size_t>(i)];
            }
        }
    }

    SqpReport rep = sqp_solve(problem, xi0, state.sqp, duals);

    // Whatever the solver status, the best detected first input is applied,
    // pushed into the box so actuator feasibility is unconditional.
    Vec u(static_cast<std::size_t>(lay.n_u));
    for (int i = 0; i < lay.n_u; ++i)
        u[static_cast<std::size_t>(i)] =
            clamp_component(rep.xi[static_cast<std::size_t>(lay.u_offset(0) + i)],
                            state.u_min[static_cast<std::size_t>(i)],
                            state.u_max[static_cast<std::size_t>(i)]);

    state.last_xi = rep.xi;
    state.last_duals.lambda = rep.lambda;
    state.last_duals.pi_l = rep.pi_l;
    state.last_duals.pi_u = rep.pi_u;
    state.filter = predict(up.first, u, d, t_i + state.horizon.Ts, state.model, state.np);

    if (diag != nullptr) {
        diag->sqp = std::move(rep);
        diag->filtered = std::move(up.first);
        diag->innovation = std::move(up.second.e);
        diag->warm_started = warm;
    }
    return u;
}

}  // namespace nmpcmc
