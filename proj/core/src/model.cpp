#include "nmpcmc/model.hpp"

#include <cmath>

namespace nmpcmc {

namespace {

double fd_step(double v) { return std::max(1e-6, 1e-6 * std::abs(v)); }

}  // namespace

Vec euler_maruyama_step(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d,
                        double dt, const Vec& dw) {
    Vec next = x;
    const Vec f = model.drift(t, x, u, d, model.params);
    axpy(dt, f, next);
    if (model.n_w > 0) {
        const Matrix sigma = model.diffusion(t, x, u, d, model.params);
        gemv_into(1.0, sigma, false, dw, 1.0, next);
    }
    if (!all_finite(next)) throw NonFiniteState("euler_maruyama_step: state diverged");
    return next;
}

Vec simulate_interval(const Model& model, double t0, double t1, const Vec& x0, const Vec& u,
                      const Vec& d, int ns, CounterRng& rng) {
    const double dt = (t1 - t0) / ns;
    const double sqrt_dt = std::sqrt(dt);
    Vec x = x0;
    Vec dw(static_cast<std::size_t>(model.n_w));
    for (int k = 0; k < ns; ++k) {
        for (int j = 0; j < model.n_w; ++j) dw[static_cast<std::size_t>(j)] = sqrt_dt * rng.normal();
        x = euler_maruyama_step(model, t0 + k * dt, x, u, d, dt, dw);
    }
    return x;
}

Vec measure(const Model& model, const NoiseSpec& noise, double t, const Vec& x, CounterRng& rng) {
    Vec y = model.measurement(t, x, model.params);
    if (noise.R.rows() > 0) {
        const Matrix l = cholesky_factor_semidefinite(noise.R);
        Vec zeta(static_cast<std::size_t>(noise.R.rows()));
        for (auto& z : zeta) z = rng.normal();
        gemv_into(1.0, l, false, zeta, 1.0, y);
    }
    return y;
}

Vec output(const Model& model, double t, const Vec& x) {
    return model.output_fn(t, x, model.params);
}

Matrix drift_jacobian_x(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d) {
    if (model.drift_jacobian_x) return model.drift_jacobian_x(t, x, u, d, model.params);
    Matrix jac(model.n_x, model.n_x);
    Vec xp = x, xm = x;
    for (int j = 0; j < model.n_x; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double h = fd_step(x[js]);
        xp[js] = x[js] + h;
        xm[js] = x[js] - h;
        const Vec fp = model.drift(t, xp, u, d, model.params);
        const Vec fm = model.drift(t, xm, u, d, model.params);
        for (int i = 0; i < model.n_x; ++i)
            jac(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
        xp[js] = x[js];
        xm[js] = x[js];
    }
    return jac;
}

Matrix drift_jacobian_u(const Model& model, double t, const Vec& x, const Vec& u, const Vec& d) {
    if (model.drift_jacobian_u) return model.drift_jacobian_u(t, x, u, d, model.params);
    Matrix jac(model.n_x, model.n_u);
    Vec up = u, um = u;
    for (int j = 0; j < model.n_u; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double h = fd_step(u[js]);
        up[js] = u[js] + h;
        um[js] = u[js] - h;
        const Vec fp = model.drift(t, x, up, d, model.params);
        const Vec fm = model.drift(t, x, um, d, model.params);
        for (int i = 0; i < model.n_x; ++i)
            jac(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
        up[js] = u[js];
        um[js] = u[js];
    }
    return jac;
}

namespace {

Matrix state_fn_jacobian(const Model::StateFn& fn, int n_out, double t, const Vec& x,
                         const Vec& params) {
    const int nx = static_cast<int>(x.size());
    Matrix jac(n_out, nx);
    Vec xp = x, xm = x;
    for (int j = 0; j < nx; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double h = fd_step(x[js]);
        xp[js] = x[js] + h;
        xm[js] = x[js] - h;
        const Vec gp = fn(t, xp, params);
        const Vec gm = fn(t, xm, params);
        for (int i = 0; i < n_out; ++i)
            jac(i, j) = (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) / (2.0 * h);
        xp[js] = x[js];
        xm[js] = x[js];
    }
    return jac;
}

}  // namespace

Matrix measurement_jacobian_x(const Model& model, double t, const Vec& x) {
    if (model.measurement_jacobian_x) return model.measurement_jacobian_x(t, x, model.params);
    return state_fn_jacobian(model.measurement, model.n_y, t, x, model.params);
}

Matrix output_jacobian_x(const Model& model, double t, const Vec& x) {
    if (model.output_jacobian_x) return model.output_jacobian_x(t, x, model.params);
    return state_fn_jacobian(model.output_fn, model.n_z, t, x, model.params);
}

}  // namespace nmpcmc
