#include "nmpcmc/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "nmpcmc/errors.hpp"
#include "nmpcmc/rng.hpp"

namespace nmpcmc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const Vec& SetpointProfile::at(double t) const {
    if (times.empty() || times.size() != values.size())
        throw DomainError("SetpointProfile: breakpoints and values must pair up");
    if (t < times.front()) throw DomainError("SetpointProfile: query before the first breakpoint");
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

int validate_scenario(const Scenario& sc) {
    if (sc.Ts <= 0.0) throw DomainError("scenario: Ts must be positive");
    if (!(sc.tf > sc.t0)) throw DomainError("scenario: tf must exceed t0");
    const double span = sc.tf - sc.t0;
    const int nbar = static_cast<int>(std::llround(span / sc.Ts));
    if (nbar < 1 || std::fabs(nbar * sc.Ts - span) > 1e-9 * std::max(1.0, span))
        throw DomainError("scenario: (tf - t0) / Ts must be a positive integer");
    if (sc.Ns < 1) throw DomainError("scenario: Ns must be at least 1");
    if (static_cast<int>(sc.x0.size()) != sc.truth.n_x)
        throw DomainError("scenario: x0 size must match the truth model");
    if (static_cast<int>(sc.u_min.size()) != sc.truth.n_u ||
        static_cast<int>(sc.u_max.size()) != sc.truth.n_u)
        throw DomainError("scenario: input bound sizes must match the truth model");
    if (sc.setpoints.times.empty() || sc.setpoints.times.size() != sc.setpoints.values.size())
        throw DomainError("scenario: setpoint profile must have matching breakpoints and values");
    if (sc.setpoints.times.front() > sc.t0)
        throw DomainError("scenario: setpoint profile must start at or before t0");
    if (!std::is_sorted(sc.setpoints.times.begin(), sc.setpoints.times.end()))
        throw DomainError("scenario: setpoint breakpoints must be ascending");
    if (sc.controller == ControllerType::nmpc) {
        if (std::fabs(sc.horizon.Ts - sc.Ts) > 1e-12)
            throw DomainError("scenario: the NMPC horizon must use the scenario sampling time");
        if (sc.ctrl_model.n_u != sc.truth.n_u)
            throw DomainError("scenario: controller and truth models must share the input");
    } else {
        if (sc.truth.n_y != 1 || sc.truth.n_u != 1)
            throw DomainError("scenario: the PI controller is single-input single-output");
    }
    return nbar;
}

double phi_metric(const std::vector<Vec>& z, const std::vector<Vec>& z_bar) {
    if (z.size() != z_bar.size() || z.empty())
        throw LengthMismatch("phi_metric: trajectories must have equal nonzero length");
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i].size() != z_bar[i].size())
            throw LengthMismatch("phi_metric: output and setpoint dimensions differ");
        for (std::size_t j = 0; j < z[i].size(); ++j) {
            const double r = z[i][j] - z_bar[i][j];
            acc += r * r;
        }
    }
    return acc / static_cast<double>(z.size());
}

SimResult run_closed_loop(const Scenario& sc, std::uint64_t sim_index) {
    const int nbar = validate_scenario(sc);
    SimResult res;
    res.sim_index = sim_index;
    CounterRng rng(sc.base_seed, sim_index);

    const bool use_nmpc = sc.controller == ControllerType::nmpc;
    NmpcState ctl;
    PiState pi = sc.pi;
    if (use_nmpc) {
        ctl = make_nmpc_state(sc.ctrl_model, sc.horizon, sc.u_min, sc.u_max, sc.Qz, sc.R_filter,
                              sc.x0_hat, sc.P0, sc.np, sc.sqp);
    } else {
        // Timing and bounds are owned by the scenario, not the gain set.
        pi.Ts = sc.Ts;
        pi.u_min = sc.u_min[0];
        pi.u_max = sc.u_max[0];
    }

    const bool record = sc.record_trajectories;
    const int stride = std::max(1, sc.record_stride);
    std::vector<Vec> z_seq, zbar_seq;
    z_seq.reserve(static_cast<std::size_t>(nbar) + 1);
    zbar_seq.reserve(static_cast<std::size_t>(nbar) + 1);

    Vec x = sc.x0;
    double t = sc.t0;
    try {
        z_seq.push_back(output(sc.truth, t, x));
        zbar_seq.push_back(sc.setpoints.at(t));
        for (int i = 0; i < nbar; ++i) {
            const Vec y = measure(sc.truth, sc.noise, t, x, rng);
            Vec u;
            if (use_nmpc) {
                std::vector<Vec> sp(static_cast<std::size_t>(sc.horizon.N));
                for (int k = 1; k <= sc.horizon.N; ++k)
                    sp[static_cast<std::size_t>(k - 1)] = sc.setpoints.at(t + k * sc.Ts);
                NmpcDiagnostics diag;
                u = nmpc_step(ctl, t, y, sp, {}, &diag);
                ++res.ocp_solves;
                if (!diag.sqp.converged) ++res.ocp_failures;
            } else {
                const PiStepResult step = pi_step(pi, y[0], sc.setpoints.at(t)[0]);
                u = {step.u};
                pi = step.next;
            }
            if (record && i % stride == 0) {
                res.trajectory.t.push_back(t);
                res.trajectory.z.push_back(z_seq.back());
                res.trajectory.z_bar.push_back(zbar_seq.back());
                res.trajectory.u.push_back(u);
                res.trajectory.y.push_back(y);
            }
            x = simulate_interval(sc.truth, t, t + sc.Ts, x, u, {}, sc.Ns, rng);
            t = sc.t0 + (i + 1) * sc.Ts;
            z_seq.push_back(output(sc.truth, t, x));
            zbar_seq.push_back(sc.setpoints.at(t));
        }
        res.phi = phi_metric(z_seq, zbar_seq);
        if (record) {
            // Final sample: no input is applied and nothing is measured.
            res.trajectory.t.push_back(t);
            res.trajectory.z.push_back(z_seq.back());
            res.trajectory.z_bar.push_back(zbar_seq.back());
            res.trajectory.u.push_back(Vec(sc.u_min.size(), kNan));
            res.trajectory.y.push_back(Vec(static_cast<std::size_t>(sc.truth.n_y), kNan));
        }
    } catch (const NonFiniteState&) {
        res.failed = true;
        res.phi = kNan;
    } catch (const DomainError&) {
        // A model evaluation pushed outside its domain is a diverged run,
        // not a configuration error: the scenario itself was validated above.
        res.failed = true;
        res.phi = kNan;
    }
    return res;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return kNan;
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = h - static_cast<double>(lo);
    return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

McAggregate aggregate_stats(const std::vector<SimResult>& sims) {
    McAggregate agg;
    agg.n_sims = static_cast<int>(sims.size());
    std::vector<double> ok;
    ok.reserve(sims.size());
    for (const SimResult& s : sims) {
        if (s.failed)
            ++agg.n_failed;
        else
            ok.push_back(s.phi);
        agg.ocp_solves += s.ocp_solves;
        agg.ocp_failures += s.ocp_failures;
    }
    agg.ocp_success_pct =
        agg.ocp_solves > 0
            ? 100.0 * static_cast<double>(agg.ocp_solves - agg.ocp_failures) /
                  static_cast<double>(agg.ocp_solves)
            : 100.0;

    if (ok.empty()) {
        agg.mean = agg.variance = agg.min = agg.max = kNan;
        agg.deciles.assign(11, kNan);
        return agg;
    }
    double sum = 0.0;
    for (double v : ok) sum += v;
    agg.mean = sum / static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : ok) ss += (v - agg.mean) * (v - agg.mean);
    agg.variance = ok.size() > 1 ? ss / static_cast<double>(ok.size() - 1) : 0.0;

    std::vector<double> sorted = ok;
    std::sort(sorted.begin(), sorted.end());
    agg.min = sorted.front();
    agg.max = sorted.back();
    agg.deciles.resize(11);
    for (int d = 0; d <= 10; ++d)
        agg.deciles[static_cast<std::size_t>(d)] = quantile_sorted(sorted, d / 10.0);
    return agg;
}

McResult run_monte_carlo(const Scenario& sc, int n_sims, int workers) {
    if (n_sims < 1) throw DomainError("run_monte_carlo: n_sims must be at least 1");
    if (workers < 1) throw DomainError("run_monte_carlo: workers must be at least 1");
    validate_scenario(sc);

    McResult out;
    out.sims.resize(static_cast<std::size_t>(n_sims));
    std::atomic<int> next{0};
    const auto worker = [&sc, n_sims, &next, &out]() {
        for (;;) {
            const int idx = next.fetch_add(1, std::memory_order_relaxed);
            if (idx >= n_sims) return;
            try {
                out.sims[static_cast<std::size_t>(idx)] =
                    run_closed_loop(sc, static_cast<std::uint64_t>(idx));
            } catch (...) {
                // run_closed_loop already absorbs model failures; anything
                // else still only costs this one simulation.
                SimResult failed;
                failed.sim_index = static_cast<std::uint64_t>(idx);
                failed.failed = true;
                failed.phi = kNan;
                out.sims[static_cast<std::size_t>(idx)] = failed;
            }
        }
    };

    const int n_threads = std::min(workers, n_sims);
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    const auto stop = std::chrono::steady_clock::now();
    out.wall_seconds = std::chrono::duration<double>(stop - start).count();

    out.aggregate = aggregate_stats(out.sims);
    return out;
}

std::vector<ScalingRow> scaling_benchmark(const Scenario& sc, int n_sims,
                                          const std::vector<int>& worker_counts) {
    std::vector<ScalingRow> rows;
    rows.reserve(worker_counts.size());
    double t1 = -1.0;
    for (int w : worker_counts) {
        const McResult r = run_monte_carlo(sc, n_sims, w);
        if (w == 1 && t1 < 0.0) t1 = r.wall_seconds;
        rows.push_back({w, r.wall_seconds, 0.0});
    }
    if (t1 < 0.0) t1 = run_monte_carlo(sc, n_sims, 1).wall_seconds;
    for (ScalingRow& row : rows) row.speedup = row.seconds > 0.0 ? t1 / row.seconds : 0.0;
    return rows;
}

Histogram phi_histogram(const std::vector<double>& phi, int bins) {
    std::vector<double> v;
    v.reserve(phi.size());
    for (double x : phi)
        if (std::isfinite(x)) v.push_back(x);
    Histogram h;
    if (v.empty()) {
        h.edges = {0.0, 1.0};
        h.counts = {0};
        return h;
    }
    std::sort(v.begin(), v.end());
    const double lo = v.front(), hi = v.back();
    if (bins <= 0) {
        const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
        const double width =
            2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
        bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 1;
        bins = std::clamp(bins, 1, 200);
    }
    if (hi <= lo) {
        h.edges = {lo, lo + 1.0};
        h.counts = {static_cast<int>(v.size())};
        return h;
    }
    const double width = (hi - lo) / bins;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + b * width;
    h.edges.back() = hi;  // exact upper edge despite rounding
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : v) {
        int b = static_cast<int>((x - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

int physical_cores() {
    // Count distinct (package, core) pairs advertised by the kernel.
    std::set<std::pair<int, int>> cores;
    const unsigned logical = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned cpu = 0; cpu < logical; ++cpu) {
        const std::string base = "/sys/devices/system/cpu/cpu" + std::to_string(cpu);
        std::ifstream core_id(base + "/topology/core_id");
        std::ifstream pkg_id(base + "/topology/physical_package_id");
        int core = -1, pkg = -1;
        if (core_id >> core && pkg_id >> pkg)
            cores.insert({pkg, core});
        else
            break;
    }
    return cores.empty() ? static_cast<int>(logical) : static_cast<int>(cores.size());
}

}  // namespace nmpcmc
