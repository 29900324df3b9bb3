#include "nmpcmc/ocp.hpp"

namespace nmpcmc {

XiLayout layout_of(const NlpInstance& nlp) {
    return {nlp.horizon.N, nlp.model.n_x, nlp.model.n_u};
}

ShootResult shoot(const Model& model, double t_k, const Vec& x_k, const Vec& u_k, const Vec& d_k,
                  const Horizon& horizon) {
    const int nx = model.n_x;
    const int nu = model.n_u;
    const double h = horizon.Ts / horizon.Nc;

    ShootResult res;
    res.F = x_k;
    res.dF_dx = Matrix::identity(nx);
    res.dF_du = Matrix(nx, nu);

    // One RK4 stage: the state slope and its sensitivities w.r.t. (x_k, u_k)
    // chained through the stage point xs = x + c h k_prev.
    struct Stage {
        Vec k;
        Matrix kx;  // dk/dx_k
        Matrix ku;  // dk/du_k
    };
    auto stage = [&](double t, const Vec& xs, const Matrix& sx, const Matrix& su) {
        Stage s;
        s.k = model.drift(t, xs, u_k, d_k, model.params);
        const Matrix a = drift_jacobian_x(model, t, xs, u_k, d_k);
        const Matrix b = drift_jacobian_u(model, t, xs, u_k, d_k);
        s.kx = gemm(1.0, a, false, sx, false, 0.0, {});
        s.ku = b;
        gemm_into(1.0, a, false, su, false, 1.0, s.ku);
        return s;
    };
    auto advanced = [&](const Vec& x, const Stage& s, double c) {
        Vec xs = x;
        axpy(c * h, s.k, xs);
        return xs;
    };
    auto advanced_sens = [&](const Matrix& m, const Matrix& dk, double c) {
        Matrix out = m;
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += c * h * dk.data()[i];
        return out;
    };

    for (int step = 0; step < horizon.Nc; ++step) {
        const double t = t_k + step * h;
        const Stage s1 = stage(t, res.F, res.dF_dx, res.dF_du);
        const Stage s2 = stage(t + 0.5 * h, advanced(res.F, s1, 0.5),
                               advanced_sens(res.dF_dx, s1.kx, 0.5),
                               advanced_sens(res.dF_du, s1.ku, 0.5));
        const Stage s3 = stage(t + 0.5 * h, advanced(res.F, s2, 0.5),
                               advanced_sens(res.dF_dx, s2.kx, 0.5),
                               advanced_sens(res.dF_du, s2.ku, 0.5));
        const Stage s4 = stage(t + h, advanced(res.F, s3, 1.0),
                               advanced_sens(res.dF_dx, s3.kx, 1.0),
                               advanced_sens(res.dF_du, s3.ku, 1.0));

        for (int i = 0; i < nx; ++i) {
            const auto is = static_cast<std::size_t>(i);
            res.F[is] += (h / 6.0) * (s1.k[is] + 2.0 * s2.k[is] + 2.0 * s3.k[is] + s4.k[is]);
        }
        for (std::size_t i = 0; i < res.dF_dx.size(); ++i)
            res.dF_dx.data()[i] += (h / 6.0) * (s1.kx.data()[i] + 2.0 * s2.kx.data()[i] +
                                                2.0 * s3.kx.data()[i] + s4.kx.data()[i]);
        for (std::size_t i = 0; i < res.dF_du.size(); ++i)
            res.dF_du.data()[i] += (h / 6.0) * (s1.ku.data()[i] + 2.0 * s2.ku.data()[i] +
                                                2.0 * s3.ku.data()[i] + s4.ku.data()[i]);
    }
    if (!all_finite(res.F)) throw NonFiniteState("shoot: integration diverged");
    return res;
}

std::pair<double, Vec> eval_objective(const NlpInstance& nlp, const Vec& xi) {
    const XiLayout lay = layout_of(nlp);
    const double ts = nlp.horizon.Ts;
    double phi = 0.0;
    Vec grad(static_cast<std::size_t>(lay.size()), 0.0);

    for (int k = 1; k <= lay.N; ++k) {
        const double t = nlp.t0 + k * ts;
        const auto xo = static_cast<std::size_t>(lay.x_offset(k));
        const Vec xk(xi.begin() + static_cast<std::ptrdiff_t>(xo),
                     xi.begin() + static_cast<std::ptrdiff_t>(xo) + lay.n_x);
        Vec res = output(nlp.model, t, xk);
        const Vec& zbar = nlp.setpoints[static_cast<std::size_t>(k - 1)];
        for (std::size_t i = 0; i < res.size(); ++i) res[i] -= zbar[i];
        const Vec qres = matvec(nlp.Qz, false, res);
        phi += ts * dot(res, qres);

        const Matrix hj = output_jacobian_x(nlp.model, t, xk);
        const Vec gx = matvec(hj, true, qres);
        for (int i = 0; i < lay.n_x; ++i)
            grad[xo + static_cast<std::size_t>(i)] += 2.0 * ts * gx[static_cast<std::size_t>(i)];
    }
    return {phi, std::move(grad)};
}

ConstraintBlocks eval_constraints(const NlpInstance& nlp, const Vec& xi) {
    const XiLayout lay = layout_of(nlp);
    ConstraintBlocks out;
    out.g.resize(static_cast<std::size_t>(lay.N * lay.n_x));
    out.dF_dx.reserve(static_cast<std::size_t>(lay.N));
    out.dF_du.reserve(static_cast<std::size_t>(lay.N));
    out.b.reserve(static_cast<std::size_t>(lay.N));

    const Vec d_empty;
    Vec xk = nlp.x0;
    for (int k = 0; k < lay.N; ++k) {
        const auto uo = static_cast<std::size_t>(lay.u_offset(k));
        const Vec uk(xi.begin() + static_cast<std::ptrdiff_t>(uo),
                     xi.begin() + static_cast<std::ptrdiff_t>(uo) + lay.n_u);
        const Vec& dk = nlp.d_seq.empty() ? d_empty : nlp.d_seq[static_cast<std::size_t>(k)];
        const ShootResult sh = shoot(nlp.model, nlp.t0 + k * nlp.horizon.Ts, xk, uk, dk,
                                     nlp.horizon);

        const auto xo = static_cast<std::size_t>(lay.x_offset(k + 1));
        Vec bk(static_cast<std::size_t>(lay.n_x));
        for (int i = 0; i < lay.n_x; ++i) {
            const auto is = static_cast<std::size_t>(i);
            const double next = xi[xo + is];
            bk[is] = sh.F[is] - next;
            out.g[static_cast<std::size_t>(k * lay.n_x) + is] = next - sh.F[is];
        }
        out.dF_dx.push_back(sh.dF_dx);
        out.dF_du.push_back(sh.dF_du);
        out.b.push_back(std::move(bk));

        xk.assign(xi.begin() + static_cast<std::ptrdiff_t>(xo),
                  xi.begin() + static_cast<std::ptrdiff_t>(xo) + lay.n_x);
    }
    return out;
}

Vec xi_from_inputs(const NlpInstance& nlp, const std::vector<Vec>& u_seq) {
    const XiLayout lay = layout_of(nlp);
    Vec xi(static_cast<std::size_t>(lay.size()));
    const Vec d_empty;
    Vec xk = nlp.x0;
    for (int k = 0; k < lay.N; ++k) {
        const Vec& uk = u_seq[static_cast<std::size_t>(k)];
        const auto uo = static_cast<std::size_t>(lay.u_offset(k));
        for (int i = 0; i < lay.n_u; ++i) xi[uo + static_cast<std::size_t>(i)] = uk[static_cast<std::size_t>(i)];
        const Vec& dk = nlp.d_seq.empty() ? d_empty : nlp.d_seq[static_cast<std::size_t>(k)];
        const ShootResult sh = shoot(nlp.model, nlp.t0 + k * nlp.horizon.Ts, xk, uk, dk,
                                     nlp.horizon);
        const auto xo = static_cast<std::size_t>(lay.x_offset(k + 1));
        for (int i = 0; i < lay.n_x; ++i) xi[xo + static_cast<std::size_t>(i)] = sh.F[static_cast<std::size_t>(i)];
        xk = sh.F;
    }
    return xi;
}

}  // namespace nmpcmc
