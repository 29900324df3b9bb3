#include "nmpcmc/cstr.hpp"

#include <cmath>

namespace nmpcmc {

namespace {

struct Concentrations {
    double cA, cB, cT;
};

Concentrations concentrations(const Vec& c, const CstrParams& p, const StoichConfig& cfg) {
    if (cfg.variant == CstrVariant::three_state) return {c[0], c[1], c[2]};
    const double cT = c[0];
    return {p.cA_in - (cT - p.cT_in) / p.beta, p.cB_in - 2.0 * (cT - p.cT_in) / p.beta, cT};
}

}  // namespace

StoichConfig stoich_config(CstrVariant variant, const CstrParams& p) {
    StoichConfig cfg;
    cfg.variant = variant;
    if (variant == CstrVariant::three_state) {
        cfg.S = {-1.0, -2.0, p.beta};
        cfg.C_in = {p.cA_in, p.cB_in, p.cT_in};
        cfg.sigma_bar = {p.sigmaA, p.sigmaB, p.sigmaT};
    } else {
        cfg.S = {p.beta};
        cfg.C_in = {p.cT_in};
        cfg.sigma_bar = {p.sigmaT};
    }
    return cfg;
}

double reaction_rate(const Vec& c, const CstrParams& p, const StoichConfig& cfg) {
    const Concentrations cc = concentrations(c, p, cfg);
    if (cc.cT <= 0.0) throw DomainError("reaction_rate: nonpositive temperature state");
    return p.k0 * std::exp(-p.EaR / cc.cT) * cc.cA * cc.cB;
}

Vec cstr_drift(double t, const Vec& n, double u, const CstrParams& p, const StoichConfig& cfg) {
    (void)t;
    const double f = u * kMlMinToLs;
    const auto nx = n.size();
    Vec c(nx);
    for (std::size_t i = 0; i < nx; ++i) c[i] = n[i] / p.V;
    const double r = reaction_rate(c, p, cfg);
    Vec dn(nx);
    for (std::size_t i = 0; i < nx; ++i)
        dn[i] = cfg.C_in[i] * f - c[i] * f + cfg.S[i] * r * p.V;
    return dn;
}

Matrix cstr_diffusion(double t, const Vec& n, double u, const CstrParams& p,
                      const StoichConfig& cfg) {
    (void)t;
    (void)n;
    (void)p;
    const double f = u * kMlMinToLs;
    const int nw = static_cast<int>(cfg.sigma_bar.size());
    Matrix sigma(nw, nw);
    for (int i = 0; i < nw; ++i) sigma(i, i) = f * cfg.sigma_bar[static_cast<std::size_t>(i)];
    return sigma;
}

Model make_cstr_model(const CstrParams& p, CstrVariant variant) {
    const StoichConfig cfg = stoich_config(variant, p);
    const int nx = variant == CstrVariant::three_state ? 3 : 1;
    const int temp_idx = nx - 1;

    Model m;
    m.n_x = nx;
    m.n_u = 1;
    m.n_d = 0;
    m.n_y = 1;
    m.n_z = 1;
    m.n_w = nx;

    m.drift = [p, cfg](double t, const Vec& x, const Vec& u, const Vec&, const Vec&) {
        return cstr_drift(t, x, u[0], p, cfg);
    };
    m.diffusion = [p, cfg](double t, const Vec& x, const Vec& u, const Vec&, const Vec&) {
        return cstr_diffusion(t, x, u[0], p, cfg);
    };
    m.measurement = [p, temp_idx](double, const Vec& x, const Vec&) {
        return Vec{x[static_cast<std::size_t>(temp_idx)] / p.V};
    };
    m.output_fn = m.measurement;
    m.measurement_jacobian_x = [p, nx, temp_idx](double, const Vec&, const Vec&) {
        Matrix jac(1, nx);
        jac(0, temp_idx) = 1.0 / p.V;
        return jac;
    };
    m.output_jacobian_x = m.measurement_jacobian_x;

    // d(drift)/dn and d(drift)/du from the closed-form rate derivative
    //   dr/dc = (k c_B, k c_A, k EaR/c_T^2 c_A c_B),  dc/dn = I/V.
    m.drift_jacobian_x = [p, cfg, nx](double, const Vec& x, const Vec& u, const Vec&, const Vec&) {
        const double f = u[0] * kMlMinToLs;
        Vec c(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) c[i] = x[i] / p.V;
        const Concentrations cc = concentrations(c, p, cfg);
        if (cc.cT <= 0.0) throw DomainError("drift_jacobian_x: nonpositive temperature state");
        const double k = p.k0 * std::exp(-p.EaR / cc.cT);
        Matrix jac(nx, nx);
        if (cfg.variant == CstrVariant::three_state) {
            const Vec drdc = {k * cc.cB, k * cc.cA, k * (p.EaR / (cc.cT * cc.cT)) * cc.cA * cc.cB};
            for (int i = 0; i < nx; ++i)
                for (int j = 0; j < nx; ++j)
                    jac(i, j) = (i == j ? -f / p.V : 0.0) +
                                cfg.S[static_cast<std::size_t>(i)] * drdc[static_cast<std::size_t>(j)];
        } else {
            const double drdcT = k * (p.EaR / (cc.cT * cc.cT)) * cc.cA * cc.cB +
                                 k * (-cc.cB / p.beta - 2.0 * cc.cA / p.beta);
            jac(0, 0) = -f / p.V + p.beta * drdcT;
        }
        return jac;
    };
    m.drift_jacobian_u = [p, cfg, nx](double, const Vec& x, const Vec&, const Vec&, const Vec&) {
        Matrix jac(nx, 1);
        for (int i = 0; i < nx; ++i) {
            const auto is = static_cast<std::size_t>(i);
            jac(i, 0) = (cfg.C_in[is] - x[is] / p.V) * kMlMinToLs;
        }
        return jac;
    };
    return m;
}

}  // namespace nmpcmc
