#include "gridshield/gradients.hpp"

#include <cmath>

namespace gridshield {

Gradients Gradients::zeros_like(const MlpParams& params) {
    Gradients g;
    for (size_t l = 0; l < params.w.size(); ++l) {
        g.dw.push_back(Mat::Zero(params.w[l].rows(), params.w[l].cols()));
        g.db.push_back(Vec::Zero(params.b[l].size()));
    }
    return g;
}

bool Gradients::all_finite() const {
    for (size_t l = 0; l < dw.size(); ++l)
        if (!dw[l].allFinite() || !db[l].allFinite()) return false;
    for (double v : ds)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

struct MomentStats {
    double mean, sigma, t;  // t = sigma + eps_norm
};

MomentStats moments(const Mat& block, double eps_norm) {
    const double n = static_cast<double>(block.size());
    const double mean = block.sum() / n;
    const double sigma = std::sqrt((block.array() - mean).square().sum() / n);
    return {mean, sigma, sigma + eps_norm};
}

}  // namespace

StepEval objective_and_gradients(const MlpParams& params, const UncertaintyState& u,
                                 const Batch& batch, const Admittance& y, double lambda_r,
                                 double eps_norm, double eps_ratio, Gradients* grads) {
    const int n = params.n_bus();
    const int rows = batch.rows();
    if (rows == 0) throw ValidationError("objective_and_gradients: empty batch");
    const double inv_m = 1.0 / (static_cast<double>(rows) * n);

    ForwardCache cache;
    const Mat out = forward_batch(params, batch.x, grads ? &cache : nullptr);
    const OutputBlocks blk = split_outputs(out, n);

    Mat p_inj(rows, n), q_inj(rows, n);
    Vec pi, qi;
    for (int r = 0; r < rows; ++r) {
        ac_injections(blk.v.row(r).transpose(), blk.theta.row(r).transpose(), y, pi, qi);
        p_inj.row(r) = pi.transpose();
        q_inj.row(r) = qi.transpose();
    }

    const MomentStats mp = moments(blk.p, eps_norm);
    const MomentStats mq = moments(blk.q, eps_norm);
    const MomentStats mv = moments(batch.v_label, eps_norm);
    const MomentStats mth = moments(batch.th_label, eps_norm);

    const Mat rp = blk.p - p_inj;
    const Mat rq = blk.q - q_inj;
    const Mat rv = batch.v_label - blk.v;
    const Mat rth = batch.th_label - blk.theta;

    StepEval eval;
    eval.losses.l[kCompP] = rp.squaredNorm() * inv_m / (mp.t * mp.t);
    eval.losses.l[kCompQ] = rq.squaredNorm() * inv_m / (mq.t * mq.t);
    eval.losses.l[kCompV] = rv.squaredNorm() * inv_m / (mv.t * mv.t);
    eval.losses.l[kCompTheta] = rth.squaredNorm() * inv_m / (mth.t * mth.t);
    eval.parts = dynamic_objective(eval.losses, u, lambda_r, eps_ratio);

    if (!grads) return eval;
    *grads = Gradients::zeros_like(params);

    const double wp = eval.parts.w[kCompP], wq = eval.parts.w[kCompQ];
    const double wv = eval.parts.w[kCompV], wth = eval.parts.w[kCompTheta];

    // d total / d output heads. For the physics components the reference
    // sigma depends on the prediction block itself, so the moment path
    // contributes (P_hat - mu)/(M sigma) * dL/dsigma on top of the residual
    // term; drop it when sigma is numerically zero (constant block).
    Mat d_p = (wp * inv_m / (mp.t * mp.t)) * rp;
    if (mp.sigma > 1e-300)
        d_p.array() += (-wp * eval.losses.l[kCompP] / mp.t) * inv_m / mp.sigma *
                       (blk.p.array() - mp.mean);
    Mat d_q = (wq * inv_m / (mq.t * mq.t)) * rq;
    if (mq.sigma > 1e-300)
        d_q.array() += (-wq * eval.losses.l[kCompQ] / mq.t) * inv_m / mq.sigma *
                       (blk.q.array() - mq.mean);
    Mat d_v = (-wv * inv_m / (mv.t * mv.t)) * rv;
    Mat d_th = (-wth * inv_m / (mth.t * mth.t)) * rth;

    // physics residual adjoint into the predicted state via ac_injections
    const Mat lam_p = (-wp * inv_m / (mp.t * mp.t)) * rp;
    const Mat lam_q = (-wq * inv_m / (mq.t * mq.t)) * rq;
    Vec dv_r, dth_r;
    for (int r = 0; r < rows; ++r) {
        dv_r.setZero(n);
        dth_r.setZero(n);
        ac_injection_adjoint(blk.v.row(r).transpose(), blk.theta.row(r).transpose(), y,
                             lam_p.row(r).transpose(), lam_q.row(r).transpose(), dv_r, dth_r);
        d_v.row(r) += dv_r.transpose();
        d_th.row(r) += dth_r.transpose();
    }

    Mat d_out(rows, 4 * n);
    d_out.middleCols(0, n) = d_p;
    d_out.middleCols(n, n) = d_q;
    d_out.middleCols(2 * n, n) = d_v;
    d_out.middleCols(3 * n, n) = d_th;

    // MLP backward
    const int layers = params.n_layers();
    Mat dz = std::move(d_out);  // output head is identity
    for (int l = layers - 1; l >= 0; --l) {
        grads->dw[l] = cache.post[l].transpose() * dz;
        grads->db[l] = dz.colwise().sum().transpose();
        if (l > 0) {
            Mat dh = dz * params.w[l].transpose();
            dz = dh.array() * cache.pre[l - 1].unaryExpr([](double v) { return swish_grad(v); }).array();
        }
    }

    // log-uncertainty gradients (dynamic regime only; clip subgradient is 0
    // outside the bounds, the hinge derivative 2*max(0,Delta) vanishes on the
    // inactive side)
    if (u.regime == Regime::dynamic) {
        const double hinge = std::max(0.0, eval.parts.delta);
        const double wd_eps = eval.parts.w_data + eps_ratio;
        const double r_eps = eval.parts.ratio + eps_ratio;
        for (int m = 0; m < 4; ++m) {
            if (u.clip_active(m)) continue;
            double g = -eval.parts.w[m] * eval.losses.l[m] + 1.0;
            if (hinge > 0.0) {
                const double dpen_ddelta = 2.0 * lambda_r * hinge;
                const double ddelta_dr = -1.0 / r_eps;
                const double dw_ds = -2.0 * eval.parts.w[m];
                const double dr_dw = (m == kCompP || m == kCompQ)
                                         ? 1.0 / wd_eps
                                         : -eval.parts.w_phys / (wd_eps * wd_eps);
                g += dpen_ddelta * ddelta_dr * dr_dw * dw_ds;
            }
            grads->ds[m] = g;
        }
    }

    if (!grads->all_finite())
        throw TrainError("non-finite gradient encountered");
    return eval;
}

}  // namespace gridshield
