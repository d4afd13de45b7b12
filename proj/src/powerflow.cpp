#include "gridshield/powerflow.hpp"

#include <Eigen/LU>
#include <cmath>

namespace gridshield {

Schedule schedule_from_model(const NetworkModel& model) {
    const int n = model.n_bus();
    Schedule s;
    s.p = Vec::Zero(n);
    s.q = Vec::Zero(n);
    s.v_set = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        s.p[i] = -model.buses[i].pd;
        s.q[i] = -model.buses[i].qd;
        s.v_set[i] = model.buses[i].vm;
    }
    for (const auto& g : model.gens) {
        if (!g.in_service) continue;
        s.p[g.bus] += g.pg;
        s.q[g.bus] += g.qg;
        s.v_set[g.bus] = g.vg;
    }
    return s;
}

PowerFlowState solve_nr(const NetworkModel& model, const Admittance& y, const Schedule& sched,
                        const NrOptions& opts, const PowerFlowState* start) {
    const int n = model.n_bus();
    if (sched.p.size() != n || sched.q.size() != n)
        throw ValidationError("schedule dimension does not match model");

    const int slack = model.slack();
    std::vector<int> nonslack, pq;
    for (int i = 0; i < n; ++i) {
        if (i == slack) continue;
        nonslack.push_back(i);
        if (model.buses[i].type == BusType::PQ) pq.push_back(i);
    }
    // unknown layout: [theta(nonslack), v(pq)]
    std::vector<int> th_pos(n, -1), v_pos(n, -1);
    for (size_t k = 0; k < nonslack.size(); ++k) th_pos[nonslack[k]] = static_cast<int>(k);
    for (size_t k = 0; k < pq.size(); ++k) v_pos[pq[k]] = static_cast<int>(nonslack.size() + k);
    const int m = static_cast<int>(nonslack.size() + pq.size());

    PowerFlowState state;
    if (start != nullptr) {
        state.v = start->v;
        state.theta = start->theta;
    } else {
        state.theta = Vec::Zero(n);
        state.v = Vec::Ones(n);
        for (int i = 0; i < n; ++i)
            if (model.buses[i].type != BusType::PQ) state.v[i] = sched.v_set[i];
    }
    // PV/slack magnitudes and slack angle are pinned regardless of the start
    for (int i = 0; i < n; ++i)
        if (model.buses[i].type != BusType::PQ) state.v[i] = sched.v_set[i];
    state.theta[slack] = 0.0;

    Vec p_inj, q_inj;
    Vec mism = Vec::Zero(m);
    auto fill_mismatch = [&]() {
        ac_injections(state.v, state.theta, y, p_inj, q_inj);
        for (int i : nonslack) mism[th_pos[i]] = sched.p[i] - p_inj[i];
        for (int i : pq) mism[v_pos[i]] = sched.q[i] - q_inj[i];
        state.max_mismatch = m == 0 ? 0.0 : mism.cwiseAbs().maxCoeff();
    };

    fill_mismatch();
    Mat jac = Mat::Zero(m, m);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (state.max_mismatch < opts.tol) {
            state.iterations = iter;
            return state;
        }
        jac.setZero();
        for (int i = 0; i < n; ++i) {
            const int rp = th_pos[i];                                    // P-mismatch row
            const int rq = model.buses[i].type == BusType::PQ ? v_pos[i] : -1;  // Q row
            if (rp < 0 && rq < 0) continue;
            double dp_dthi = 0.0, dp_dvi = 0.0, dq_dthi = 0.0, dq_dvi = 0.0;
            for (const auto& e : y.rows[i]) {
                const int j = e.col;
                if (j == i) {
                    dp_dvi += 2.0 * state.v[i] * e.g;
                    dq_dvi += -2.0 * state.v[i] * e.b;
                    continue;
                }
                const double d = state.theta[i] - state.theta[j];
                const double c = std::cos(d), s = std::sin(d);
                const double pc = e.g * c + e.b * s;
                const double ps = e.g * s - e.b * c;
                const double vv = state.v[i] * state.v[j];
                dp_dthi += vv * (-e.g * s + e.b * c);
                dp_dvi += state.v[j] * pc;
                dq_dthi += vv * pc;
                dq_dvi += state.v[j] * ps;
                // mismatch rows carry -dInj
                if (th_pos[j] >= 0) {
                    if (rp >= 0) jac(rp, th_pos[j]) = -vv * (e.g * s - e.b * c);
                    if (rq >= 0) jac(rq, th_pos[j]) = vv * pc;
                }
                if (v_pos[j] >= 0) {
                    if (rp >= 0) jac(rp, v_pos[j]) = -state.v[i] * pc;
                    if (rq >= 0) jac(rq, v_pos[j]) = -state.v[i] * ps;
                }
            }
            if (rp >= 0) {
                jac(rp, rp) = -dp_dthi;
                if (v_pos[i] >= 0) jac(rp, v_pos[i]) = -dp_dvi;
            }
            if (rq >= 0) {
                jac(rq, th_pos[i]) = -dq_dthi;
                jac(rq, rq) = -dq_dvi;
            }
        }
        Eigen::PartialPivLU<Mat> lu(jac);
        Vec step = lu.solve(-mism);  // J dx = -f with f = mismatch
        if (!step.allFinite() || (jac * step + mism).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + mism.cwiseAbs().maxCoeff()))
            throw ValidationError("singular power-flow Jacobian");
        for (int i : nonslack) state.theta[i] += step[th_pos[i]];
        for (int i : pq) state.v[i] += step[v_pos[i]];
        fill_mismatch();
    }
    if (state.max_mismatch < opts.tol) {
        state.iterations = opts.max_iter;
        return state;
    }
    throw ConvergenceError("power flow did not converge: max mismatch " +
                               std::to_string(state.max_mismatch) + " p.u. after " +
                               std::to_string(opts.max_iter) + " iterations",
                           state.max_mismatch, opts.max_iter);
}

}  // namespace gridshield
