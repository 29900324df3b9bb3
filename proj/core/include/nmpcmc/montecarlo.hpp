#pragma once

#include <cstdint>
#include <vector>

#include "nmpcmc/controllers.hpp"
#include "nmpcmc/linalg.hpp"
#include "nmpcmc/model.hpp"
#include "nmpcmc/ocp.hpp"

namespace nmpcmc {

/// Piecewise-constant reference: values[i] applies from times[i] until the
/// next breakpoint. Times are strictly ascending and cover the query range.
struct SetpointProfile {
    std::vector<double> times;
    std::vector<Vec> values;

    const Vec& at(double t) const;
};

enum class ControllerType { nmpc, pi };

/// Everything one stochastic closed-loop experiment depends on. The truth
/// model generates the data; the controller side sees only measurements.
/// Immutable during a batch and shared by all workers.
struct Scenario {
    Model truth;
    NoiseSpec noise;

    ControllerType controller = ControllerType::nmpc;

    // NMPC configuration (ignored for PI runs)
    Model ctrl_model;
    Horizon horizon;
    Matrix Qz;
    Matrix R_filter;  ///< measurement covariance assumed by the CD-EKF
    Vec x0_hat;
    Matrix P0;
    int np = 5;
    SqpOptions sqp;

    // PI configuration (ignored for NMPC runs); bounds come from u_min/u_max
    PiState pi;

    Vec u_min, u_max;
    double t0 = 0.0, tf = 0.0, Ts = 0.0;
    int Ns = 20;  ///< Euler-Maruyama steps per control interval
    SetpointProfile setpoints;
    Vec x0;  ///< truth initial state
    std::uint64_t base_seed = 0;

    bool record_trajectories = false;
    int record_stride = 1;
};

/// Checks the cross-field invariants and returns the sample count N_bar,
/// with (tf - t0) an exact multiple of Ts. Throws DomainError otherwise.
int validate_scenario(const Scenario& sc);

/// Sampled closed-loop record: one row per retained sample. z is the
/// noise-free truth output; u and y are NaN on the final row, where no input
/// is applied and nothing is measured.
struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> z, z_bar, u, y;
};

/// Outcome of one simulation. A run that diverges (non-finite state or a
/// model evaluation leaving its domain) is marked failed with phi = NaN;
/// unconverged OCP solves are counted separately and do not fail the run.
struct SimResult {
    std::uint64_t sim_index = 0;
    double phi = 0.0;
    bool failed = false;
    int ocp_solves = 0;
    int ocp_failures = 0;
    Trajectory trajectory;
};

/// Scaled point-wise squared tracking error
///
///   phi = 1/(N+1) sum_{i=0..N} |z_i - z_bar_i|^2
///
/// over the noise-free outputs of a run, endpoints included.
double phi_metric(const std::vector<Vec>& z, const std::vector<Vec>& z_bar);

/// One full closed loop: for each sample, measure, apply the controller,
/// integrate the truth SDE to the next sample. All randomness comes from the
/// counter stream (base_seed, sim_index), so the result is a pure function
/// of (scenario, sim_index) regardless of scheduling.
SimResult run_closed_loop(const Scenario& sc, std::uint64_t sim_index);

/// Deterministic order statistics of the per-simulation phi values.
struct McAggregate {
    int n_sims = 0;
    int n_failed = 0;
    double mean = 0.0;
    double variance = 0.0;  ///< unbiased sample variance
    double min = 0.0;
    double max = 0.0;
    std::vector<double> deciles;  ///< 0%, 10%, ..., 100% (11 entries)
    long long ocp_solves = 0;
    long long ocp_failures = 0;
    double ocp_success_pct = 100.0;
};

McAggregate aggregate_stats(const std::vector<SimResult>& sims);

/// Batch outcome: per-simulation records in index order plus their
/// aggregate. Identical for any worker count by construction.
struct McResult {
    std::vector<SimResult> sims;
    McAggregate aggregate;
    double wall_seconds = 0.0;
};

/// Runs simulations 0..n_sims-1 distributed over `workers` threads pulling
/// indices from a shared atomic counter; results land in preallocated
/// index-order slots. A failed simulation is recorded, never fatal.
McResult run_monte_carlo(const Scenario& sc, int n_sims, int workers);

struct ScalingRow {
    int workers = 0;
    double seconds = 0.0;
    double speedup = 0.0;  ///< T(1) / T(workers)
};

/// Times run_monte_carlo at each worker count. T(1) is measured from the
/// first entry equal to one, or from an extra reference run when absent.
std::vector<ScalingRow> scaling_benchmark(const Scenario& sc, int n_sims,
                                          const std::vector<int>& worker_counts);

/// Equal-width histogram of the finite phi values. bins <= 0 selects the
/// Freedman-Diaconis rule (capped to [1, 200]).
struct Histogram {
    std::vector<double> edges;  ///< bins + 1 ascending edges
    std::vector<int> counts;
};

Histogram phi_histogram(const std::vector<double>& phi, int bins = 0);

/// Physical core count via the cpu topology when readable, otherwise the
/// logical count reported by the standard library (at least 1).
int physical_cores();

}  // namespace nmpcmc
