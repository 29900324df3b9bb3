#pragma once

#include "nmpcmc/linalg.hpp"
#include "nmpcmc/model.hpp"

namespace nmpcmc {

/// Adiabatic A + 2B -> C reactor in mole-number form,
///
///   dn(t) = (C_in F - c F + S' r(c) V) dt + F sigma_bar dw(t),   c = n / V,
///
/// with the exothermic heat balance folded into a temperature state c_T that
/// enters like a concentration (stoichiometric coefficient beta).
///
/// Two variants share one parameter set:
///  - three_state: n = (n_A, n_B, n_T), the simulation truth,
///  - one_state:   n = (n_T), the controller/estimator model, where c_A and
///    c_B are recovered algebraically (see reaction_rate).
enum class CstrVariant { three_state, one_state };

struct CstrParams {
    double V = 0.0;      ///< reactor volume (L)
    double k0 = 0.0;     ///< Arrhenius pre-exponential (L/(mol*s))
    double EaR = 0.0;    ///< activation energy over gas constant (K)
    double beta = 0.0;   ///< temperature stoichiometric coefficient (K*L/mol)
    double cA_in = 0.0;  ///< inlet concentration of A (mol/L)
    double cB_in = 0.0;  ///< inlet concentration of B (mol/L)
    double cT_in = 0.0;  ///< inlet temperature state (K)
    double sigmaA = 0.0;
    double sigmaB = 0.0;
    double sigmaT = 0.0;
    double u_min = 0.0;  ///< flow lower bound (mL/min)
    double u_max = 0.0;  ///< flow upper bound (mL/min)
};

/// Stoichiometry/inlet/diffusion triplet for a variant.
struct StoichConfig {
    CstrVariant variant = CstrVariant::three_state;
    Vec S;
    Vec C_in;
    Vec sigma_bar;
};

/// Flows are entered in mL/min everywhere (config, bounds, decision
/// variables); the dynamics convert once to L/s internally.
inline constexpr double kMlMinToLs = 1e-3 / 60.0;

StoichConfig stoich_config(CstrVariant variant, const CstrParams& p);

/// r(c) = k0 exp(-EaR/c_T) c_A c_B. The one-state variant reconstructs
///   c_A = cA_in - (c_T - cT_in)/beta,  c_B = cB_in - 2 (c_T - cT_in)/beta
/// from the reaction invariants c_A + c_T/beta and c_B + 2 c_T/beta, which
/// the flow terms relax to their inlet values; starting from n = C_in V the
/// deterministic three-state trajectory stays exactly on that manifold.
/// Throws DomainError if c_T <= 0.
double reaction_rate(const Vec& c, const CstrParams& p, const StoichConfig& cfg);

/// Drift C_in F - c F + S' r(c) V with F = u mL/min converted internally.
Vec cstr_drift(double t, const Vec& n, double u, const CstrParams& p, const StoichConfig& cfg);

/// Diffusion F sigma_bar (diagonal; inlet variation scales with flow).
Matrix cstr_diffusion(double t, const Vec& n, double u, const CstrParams& p,
                      const StoichConfig& cfg);

/// Bundle a variant as a simulation/estimation Model. Measurement and output
/// are both the temperature c_T = n_T / V; drift jacobians are analytic.
Model make_cstr_model(const CstrParams& p, CstrVariant variant);

}  // namespace nmpcmc
