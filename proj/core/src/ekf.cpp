#include "nmpcmc/ekf.hpp"

namespace nmpcmc {

namespace {

struct JointDeriv {
    Vec dx;
    Matrix dp;
};

JointDeriv joint_rhs(const Model& model, double t, const Vec& x, const Matrix& p, const Vec& u,
                     const Vec& d) {
    JointDeriv out;
    out.dx = model.drift(t, x, u, d, model.params);
    const Matrix a = drift_jacobian_x(model, t, x, u, d);
    out.dp = gemm(1.0, a, false, p, false, 0.0, {});
    gemm_into(1.0, p, false, a, true, 1.0, out.dp);
    const Matrix sigma = model.diffusion(t, x, u, d, model.params);
    if (sigma.cols() > 0) gemm_into(1.0, sigma, false, sigma, true, 1.0, out.dp);
    return out;
}

}  // namespace

FilterState predict(const FilterState& fs, const Vec& u, const Vec& d, double t_next,
                    const Model& model, int np) {
    const double h = (t_next - fs.t) / np;
    Vec x = fs.x_hat;
    Matrix p = fs.P;

    Vec xs(x.size());
    Matrix ps(p.rows(), p.cols());
    for (int step = 0; step < np; ++step) {
        const double t = fs.t + step * h;
        const JointDeriv k1 = joint_rhs(model, t, x, p, u, d);
        for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + 0.5 * h * k1.dx[i];
        for (std::size_t i = 0; i < p.size(); ++i) ps.data()[i] = p.data()[i] + 0.5 * h * k1.dp.data()[i];
        const JointDeriv k2 = joint_rhs(model, t + 0.5 * h, xs, ps, u, d);
        for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + 0.5 * h * k2.dx[i];
        for (std::size_t i = 0; i < p.size(); ++i) ps.data()[i] = p.data()[i] + 0.5 * h * k2.dp.data()[i];
        const JointDeriv k3 = joint_rhs(model, t + 0.5 * h, xs, ps, u, d);
        for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + h * k3.dx[i];
        for (std::size_t i = 0; i < p.size(); ++i) ps.data()[i] = p.data()[i] + h * k3.dp.data()[i];
        const JointDeriv k4 = joint_rhs(model, t + h, xs, ps, u, d);

        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += (h / 6.0) * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
        for (std::size_t i = 0; i < p.size(); ++i)
            p.data()[i] += (h / 6.0) *
                           (k1.dp.data()[i] + 2.0 * k2.dp.data()[i] + 2.0 * k3.dp.data()[i] +
                            k4.dp.data()[i]);
        symmetrize(p);
        if (!all_finite(x) || !all_finite(p)) throw NonFiniteState("predict: filter diverged");
    }
    return {t_next, std::move(x), std::move(p)};
}

std::pair<FilterState, FilterUpdateReport> filter_update(double t, const Vec& x_pred,
                                                         const Matrix& p_pred, const Vec& y,
                                                         const Matrix& r, const Model& model) {
    const int nx = p_pred.rows();
    FilterUpdateReport rep;
    rep.y_hat = model.measurement(t, x_pred, model.params);
    const Matrix c = measurement_jacobian_x(model, t, x_pred);

    rep.e.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) rep.e[i] = y[i] - rep.y_hat[i];

    const Matrix pc = gemm(1.0, p_pred, false, c, true, 0.0, {});  // P C'
    rep.R_e = gemm(1.0, c, false, pc, false, 1.0, r);
    symmetrize(rep.R_e);
    Matrix l;
    try {
        l = cholesky_factor(rep.R_e);
    } catch (const NotPositiveDefinite&) {
        throw NotPositiveDefinite("filter_update: innovation covariance not positive definite");
    }
    // K = P C' R_e^{-1} computed as the solve R_e K' = C P'
    const Matrix kt = cholesky_solve(l, pc.transposed());
    rep.K = kt.transposed();

    FilterState out;
    out.t = t;
    out.x_hat = x_pred;
    gemv_into(1.0, rep.K, false, rep.e, 1.0, out.x_hat);

    Matrix ikc = Matrix::identity(nx);
    gemm_into(-1.0, rep.K, false, c, false, 1.0, ikc);
    const Matrix ikc_p = gemm(1.0, ikc, false, p_pred, false, 0.0, {});
    out.P = gemm(1.0, ikc_p, false, ikc, true, 0.0, {});
    const Matrix kr = gemm(1.0, rep.K, false, r, false, 0.0, {});
    gemm_into(1.0, kr, false, rep.K, true, 1.0, out.P);
    symmetrize(out.P);
    return {std::move(out), std::move(rep)};
}

}  // namespace nmpcmc
