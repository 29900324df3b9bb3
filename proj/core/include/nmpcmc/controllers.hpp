#pragma once

#include <vector>

#include "nmpcmc/ekf.hpp"
#include "nmpcmc/linalg.hpp"
#include "nmpcmc/model.hpp"
#include "nmpcmc/ocp.hpp"
#include "nmpcmc/sqp.hpp"

namespace nmpcmc {

/// Discrete PI controller with input saturation and anti-windup. The
/// integrator memory I_hat is the only evolving quantity; everything else is
/// a tuning constant. Invariant: Ts > 0 (enforced where the state is built).
struct PiState {
    double kP = 0.0;
    double kI = 0.0;
    double kaw = 0.0;    ///< anti-windup gain; 0 disables the mechanism
    double Ts = 0.0;     ///< sampling time (s)
    double u_bar = 0.0;  ///< nominal input the corrections act around
    double u_min = 0.0;
    double u_max = 0.0;
    double I_hat = 0.0;  ///< integrator state carried between samples
};

/// Full evaluation record of one PI sample, so each intermediate quantity of
/// the update law is visible to tests and diagnostics.
struct PiStepResult {
    double e = 0.0;      ///< setpoint error
    double P = 0.0;      ///< proportional term
    double I = 0.0;      ///< raw integral term
    double u_hat = 0.0;  ///< unsaturated response
    double u = 0.0;      ///< applied input after clamping
    double I_aw = 0.0;   ///< anti-windup correction
    PiState next;        ///< state carrying the corrected integrator
};

/// One PI sample, evaluated in this exact order:
///
///   e  = ybar - y                    I_aw  = Ts kaw (u_hat - u)
///   P  = kP e                        I_hat = I + I_aw
///   I  = I_hat + Ts kI e
///   u_hat = u_bar + P + I
///   u  = max(u_min, min(u_max, u_hat))
///
/// Pure transition: the same (state, y, ybar) always produces the same
/// result; the caller adopts result.next for the following sample.
PiStepResult pi_step(const PiState& state, double y_k, double y_bar_k);

/// Closed-loop NMPC controller state: the one-step-ahead filter prediction,
/// the previous OCP solution for warm starting, and the regulator problem
/// data shared by every step.
struct NmpcState {
    Model model;      ///< controller-side prediction model
    Horizon horizon;  ///< N control intervals of Ts with Nc RK4 steps each
    Vec u_min, u_max;
    Matrix Qz;        ///< output tracking weight
    Matrix R;         ///< measurement covariance assumed by the filter
    int np = 5;       ///< RK4 steps for each covariance prediction
    SqpOptions sqp;
    FilterState filter;  ///< prediction (x_hat, P) valid at the next sample
    Vec last_xi;         ///< previous solution; empty forces a cold start
    SqpWarmStart last_duals;  ///< previous multipliers, shifted alongside last_xi
};

/// Everything observable about one NMPC sample beyond the applied input.
struct NmpcDiagnostics {
    SqpReport sqp;
    FilterState filtered;  ///< posterior state estimate at the sample time
    Vec innovation;
    bool warm_started = false;
};

/// Build a ready-to-run NMPC state with the filter prior (x0_hat, p0) taken
/// as the prediction for the first measurement.
NmpcState make_nmpc_state(Model model, const Horizon& horizon, Vec u_min, Vec u_max, Matrix qz,
                          Matrix r, const Vec& x0_hat, const Matrix& p0, int np = 5,
                          const SqpOptions& sqp = {});

/// One NMPC sample at t_i: update the filter with y_i, solve the regulator
/// over [t_i, t_i + N Ts] from the posterior estimate, apply the first input
/// of the solution (clamped into the box), and propagate the prediction to
/// the next sample with that input.
///
/// setpoints holds zbar at stages 1..N; d is a per-stage disturbance held
/// constant over the horizon (empty when the model has none). A solver that
/// stops at its iteration limit is not an error: the best detected input is
/// applied and the report in diagnostics says what happened. Divergence of
/// the state prediction itself still throws NonFiniteState, since no
/// sensible input exists at that point.
Vec nmpc_step(NmpcState& state, double t_i, const Vec& y_i, const std::vector<Vec>& setpoints,
              const Vec& d = {}, NmpcDiagnostics* diag = nullptr);

}  // namespace nmpcmc
