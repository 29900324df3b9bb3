#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmpcmc/cstr.hpp"
#include "support/cstr_fixtures.hpp"

using namespace nmpcmc;
using fixtures::study_params;

TEST_CASE("reaction_rate: bilinear in cA, cB") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    CHECK(reaction_rate({0.0, 0.7, 300.0}, p, cfg) == 0.0);
    CHECK(reaction_rate({0.7, 0.0, 300.0}, p, cfg) == 0.0);
}

TEST_CASE("reaction_rate: zero activation energy") {
    CstrParams p = study_params();
    p.EaR = 0.0;
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    CHECK(reaction_rate({1.0, 1.0, 300.0}, p, cfg) == doctest::Approx(p.k0).epsilon(1e-14));
}

TEST_CASE("reaction_rate: frozen scalar evaluation") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    // k0 = e^{24.6}, EaR = 8500, cA = cB = 0.5, cT = 300, evaluated separately
    CHECK(reaction_rate({0.5, 0.5, 300.0}, p, cfg) ==
          doctest::Approx(0.005978248215701345).epsilon(1e-13));
}

TEST_CASE("reaction_rate: rejects nonpositive temperature") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    CHECK_THROWS_AS((void)reaction_rate({0.5, 0.5, 0.0}, p, cfg), DomainError);
    CHECK_THROWS_AS((void)reaction_rate({0.5, 0.5, -1.0}, p, cfg), DomainError);
}

TEST_CASE("cstr_drift: inflow equals outflow at inlet composition") {
    CstrParams p = study_params();
    p.cA_in = 0.0;  // no A, so no reaction anywhere on the inlet state
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    const Vec n{p.cA_in * p.V, p.cB_in * p.V, p.cT_in * p.V};
    const Vec dn = cstr_drift(0.0, n, 700.0, p, cfg);
    for (double v : dn) CHECK(v == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("cstr_drift: zero flow leaves pure reaction") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    const Vec n{0.5 * p.V, 0.6 * p.V, 320.0 * p.V};
    const double r = reaction_rate({0.5, 0.6, 320.0}, p, cfg);
    const Vec dn = cstr_drift(0.0, n, 0.0, p, cfg);
    CHECK(dn[0] == doctest::Approx(-r * p.V).epsilon(1e-13));
    CHECK(dn[1] == doctest::Approx(-2.0 * r * p.V).epsilon(1e-13));
    CHECK(dn[2] == doctest::Approx(p.beta * r * p.V).epsilon(1e-13));
}

TEST_CASE("cstr_drift: temperature row expansion") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    const Vec c{0.31, 0.44, 331.7};
    const Vec n{c[0] * p.V, c[1] * p.V, c[2] * p.V};
    const double u = 412.0;
    const double f = u * kMlMinToLs;
    const double r = reaction_rate(c, p, cfg);
    const Vec dn = cstr_drift(0.0, n, u, p, cfg);
    CHECK(dn[2] == doctest::Approx(p.beta * r * p.V + (p.cT_in - c[2]) * f).epsilon(1e-13));
}

TEST_CASE("cstr_diffusion: zero flow, zero matrix") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    const Matrix s = cstr_diffusion(0.0, {0.1, 0.1, 30.0}, 0.0, p, cfg);
    CHECK(frobenius_norm(s) == 0.0);
}

TEST_CASE("cstr_diffusion: linear in flow, diagonal sigma_bar") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::three_state, p);
    const Vec n{0.1, 0.1, 30.0};
    const Matrix s1 = cstr_diffusion(0.0, n, 1.0, p, cfg);
    const Matrix s2 = cstr_diffusion(0.0, n, 2.0, p, cfg);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(s2(i, j) == doctest::Approx(2.0 * s1(i, j)).epsilon(1e-15));
            if (i != j) CHECK(s1(i, j) == 0.0);
        }
    }
    CHECK(s1(0, 0) == doctest::Approx(kMlMinToLs * p.sigmaA).epsilon(1e-15));
    CHECK(s1(2, 2) == doctest::Approx(kMlMinToLs * p.sigmaT).epsilon(1e-15));
}

TEST_CASE("cstr_diffusion: one-state variant is 1x1 F sigmaT") {
    const CstrParams p = study_params();
    const StoichConfig cfg = stoich_config(CstrVariant::one_state, p);
    const Matrix s = cstr_diffusion(0.0, {30.0}, 600.0, p, cfg);
    CHECK(s.rows() == 1);
    CHECK(s.cols() == 1);
    CHECK(s(0, 0) == doctest::Approx(600.0 * kMlMinToLs * p.sigmaT).epsilon(1e-15));
}

TEST_CASE("one-state and three-state temperature drifts agree on the reduction manifold") {
    const CstrParams p = study_params();
    const StoichConfig cfg3 = stoich_config(CstrVariant::three_state, p);
    const StoichConfig cfg1 = stoich_config(CstrVariant::one_state, p);
    for (double cT = 280.0; cT <= 340.0; cT += 2.5) {
        const double cA = p.cA_in - (cT - p.cT_in) / p.beta;
        const double cB = p.cB_in - 2.0 * (cT - p.cT_in) / p.beta;
        for (double u : {50.0, 300.0, 900.0}) {
            const Vec dn3 = cstr_drift(0.0, {cA * p.V, cB * p.V, cT * p.V}, u, p, cfg3);
            const Vec dn1 = cstr_drift(0.0, {cT * p.V}, u, p, cfg1);
            CHECK(dn3[2] == doctest::Approx(dn1[0]).epsilon(1e-10));
        }
    }
}

TEST_CASE("deterministic three-state trajectory stays on the reduction manifold") {
    const CstrParams p = study_params();
    Model truth = make_cstr_model(p, CstrVariant::three_state);
    truth.diffusion = [](double, const Vec&, const Vec&, const Vec&, const Vec&) {
        return Matrix(3, 3);
    };
    CounterRng rng(1, 0);
    Vec n{p.cA_in * p.V, p.cB_in * p.V, p.cT_in * p.V};
    for (int i = 0; i < 200; ++i) {
        n = simulate_interval(truth, i * 1.0, (i + 1) * 1.0, n, {420.0}, {}, 20, rng);
        const double cT = n[2] / p.V;
        const double cA = p.cA_in - (cT - p.cT_in) / p.beta;
        const double cB = p.cB_in - 2.0 * (cT - p.cT_in) / p.beta;
        CHECK(n[0] / p.V == doctest::Approx(cA).epsilon(1e-9));
        CHECK(n[1] / p.V == doctest::Approx(cB).epsilon(1e-9));
    }
}

TEST_CASE("analytic drift jacobians match finite differences") {
    const CstrParams p = study_params();
    for (CstrVariant variant : {CstrVariant::three_state, CstrVariant::one_state}) {
        const Model with_jac = make_cstr_model(p, variant);
        Model fd_only = with_jac;
        fd_only.drift_jacobian_x = nullptr;
        fd_only.drift_jacobian_u = nullptr;

        const Vec x = variant == CstrVariant::three_state
                          ? Vec{0.45 * p.V, 0.71 * p.V, 318.0 * p.V}
                          : Vec{318.0 * p.V};
        const Vec u{377.0};
        const Matrix ax = drift_jacobian_x(with_jac, 0.0, x, u, {});
        const Matrix fx = drift_jacobian_x(fd_only, 0.0, x, u, {});
        for (int i = 0; i < ax.rows(); ++i)
            for (int j = 0; j < ax.cols(); ++j)
                CHECK(ax(i, j) == doctest::Approx(fx(i, j)).epsilon(1e-6));

        const Matrix au = drift_jacobian_u(with_jac, 0.0, x, u, {});
        const Matrix fu = drift_jacobian_u(fd_only, 0.0, x, u, {});
        for (int i = 0; i < au.rows(); ++i)
            CHECK(au(i, 0) == doctest::Approx(fu(i, 0)).epsilon(1e-6));
    }
}

TEST_CASE("model output is the temperature") {
    const CstrParams p = study_params();
    const Model m3 = make_cstr_model(p, CstrVariant::three_state);
    const Model m1 = make_cstr_model(p, CstrVariant::one_state);
    const Vec z3 = output(m3, 0.0, {0.1, 0.1, 310.0 * p.V});
    const Vec z1 = output(m1, 0.0, {310.0 * p.V});
    CHECK(z3[0] == doctest::Approx(310.0).epsilon(1e-14));
    CHECK(z1[0] == doctest::Approx(310.0).epsilon(1e-14));
}
