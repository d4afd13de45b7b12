#include "gridshield/attack_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <tuple>

#include "gridshield/rng.hpp"
#include "gridshield/verify.hpp"

namespace gridshield {

namespace {

constexpr double kInf = 1e30;
constexpr double kSmooth2 = 1e-12;  // |x| ~ sqrt(x^2 + kSmooth2) inside the solver

inline double smooth_abs(double x) { return std::sqrt(x * x + kSmooth2); }
inline double smooth_abs_grad(double x) { return x / std::sqrt(x * x + kSmooth2); }

// Variable layout over the zone: deltas from baseline. Zero-injection buses
// carry no P/Q variables (their attacked injections are pinned to zero).
struct Layout {
    std::vector<int> zbus;                 // sorted zone buses
    std::vector<int> zpos;                 // bus -> zone position or -1
    std::vector<int> p_var, q_var;         // per zone position, -1 if pinned
    std::vector<int> v_var, th_var;        // per zone position
    std::vector<int> gen_pos, load_pos;    // zone positions (LRA)
    std::vector<int> gp_var, gm_var;       // per gen_pos entry (LRA)
    int n = 0;
    Vec lo, hi;
};

struct Row {
    enum class Kind {
        residual_p, residual_q, boundary, conservation_p, conservation_q,
        corruption_p, corruption_q, lra_link, lra_load_sum
    };
    Kind kind;
    bool equality = false;
    int bus = -1;       // constraint bus (residual/corruption/boundary)
    double sign = 1.0;  // +1 / -1 side of a paired |expr| <= t constraint
    double bound = 0.0; // t (inequalities) in g = sign*expr - bound <= 0
    double center = 0.0;  // corruption: baseline residual r0
};

struct BoundaryFlow {
    int bus;
    std::vector<std::pair<int, bool>> branches;  // (branch idx, from side)
    double f0 = 0.0;
};

struct ProblemData {
    const AttackProblem* prob;
    Layout layout;
    std::vector<Row> rows;
    std::vector<int> cbus;          // zone + exterior halo, sorted
    std::vector<char> is_cbus;
    std::vector<BoundaryFlow> boundary;
    std::vector<std::pair<int, int>> line_targets;
    double cons_tol_p = 0.0, cons_tol_q = 0.0;
    double cons_const_p = 0.0, cons_const_q = 0.0;  // zi contribution to zone sums
    double fixed_violation = 0.0;   // residual violation on buses outside cbus
    Vec p0_inj, q0_inj;             // baseline reconstructions
};

bool is_zi(const AttackZone& z, int bus) {
    return std::binary_search(z.zero_injection.begin(), z.zero_injection.end(), bus);
}

Layout build_layout(const AttackProblem& prob) {
    const AttackZone& zone = *prob.zone;
    const Snapshot& base = *prob.baseline;
    Layout lay;
    lay.zbus = zone.buses;
    lay.zpos.assign(prob.model->n_bus(), -1);
    for (size_t k = 0; k < lay.zbus.size(); ++k) lay.zpos[lay.zbus[k]] = static_cast<int>(k);

    const size_t m = lay.zbus.size();
    lay.p_var.assign(m, -1);
    lay.q_var.assign(m, -1);
    lay.v_var.assign(m, -1);
    lay.th_var.assign(m, -1);
    std::vector<double> lo, hi;
    auto add_var = [&](double l, double h) {
        lo.push_back(l);
        hi.push_back(h);
        return static_cast<int>(lo.size()) - 1;
    };

    const FamilyConfig& fam = prob.family;
    LraBuses gl;
    if (fam.family == AttackFamily::lra) gl = lra_buses(*prob.model, zone);

    for (size_t k = 0; k < m; ++k) {
        const int bus = lay.zbus[k];
        if (!is_zi(zone, bus)) {
            double plo = -kInf, phi = kInf, qlo = -kInf, qhi = kInf;
            if (fam.family == AttackFamily::simple) {
                const double pe = fam.simple.kappa_p * std::max(std::abs(base.p[bus]), fam.simple.delta_p);
                const double qe = fam.simple.kappa_q * std::max(std::abs(base.q[bus]), fam.simple.delta_q);
                plo = -pe; phi = pe; qlo = -qe; qhi = qe;
            } else if (fam.family == AttackFamily::lra) {
                const bool gen = std::binary_search(gl.gen.begin(), gl.gen.end(), bus);
                const double cap = gen ? lra_gen_cap_abs(fam.lra, base.p[bus])
                                       : lra_load_cap_abs(fam.lra, base.p[bus]);
                plo = -cap; phi = cap;
            }
            lay.p_var[k] = add_var(plo, phi);
            lay.q_var[k] = add_var(qlo, qhi);
        }
        lay.v_var[k] = add_var(prob.feasible.v_min - base.v[bus], prob.feasible.v_max - base.v[bus]);
        lay.th_var[k] = add_var(prob.feasible.theta_min - base.theta[bus],
                                prob.feasible.theta_max - base.theta[bus]);
    }

    if (fam.family == AttackFamily::lra) {
        for (int bus : gl.gen) {
            lay.gen_pos.push_back(lay.zpos[bus]);
            const double cap = lra_gen_cap_abs(fam.lra, base.p[bus]);
            lay.gp_var.push_back(add_var(0.0, cap));
            lay.gm_var.push_back(add_var(0.0, cap));
        }
        for (int bus : gl.load) lay.load_pos.push_back(lay.zpos[bus]);
    }

    lay.n = static_cast<int>(lo.size());
    lay.lo = Eigen::Map<Vec>(lo.data(), lay.n);
    lay.hi = Eigen::Map<Vec>(hi.data(), lay.n);
    return lay;
}

ProblemData build_problem(const AttackProblem& prob) {
    ProblemData pd;
    pd.prob = &prob;
    pd.layout = build_layout(prob);
    const AttackZone& zone = *prob.zone;
    const Snapshot& base = *prob.baseline;
    const int n = prob.model->n_bus();

    std::tie(pd.p0_inj, pd.q0_inj) = ac_injections(base.v, base.theta, *prob.y);

    // constraint buses: zone plus the exterior halo whose reconstructions
    // depend on zone states
    pd.is_cbus.assign(n, 0);
    for (int b : zone.buses) {
        pd.is_cbus[b] = 1;
        for (int nbr : prob.graph->adj[b]) pd.is_cbus[nbr] = 1;
    }
    for (int b = 0; b < n; ++b)
        if (pd.is_cbus[b]) pd.cbus.push_back(b);

    // residual constraints on buses outside the halo are fixed at their
    // baseline values; a violation there can never be repaired
    for (int b = 0; b < n; ++b) {
        if (pd.is_cbus[b]) continue;
        pd.fixed_violation = std::max(
            {pd.fixed_violation, std::abs(base.p[b] - pd.p0_inj[b]) - prob.feasible.tau_p,
             std::abs(base.q[b] - pd.q0_inj[b]) - prob.feasible.tau_q});
    }
    pd.fixed_violation = std::max(0.0, pd.fixed_violation);

    for (int b : pd.cbus) {
        for (double sign : {1.0, -1.0}) {
            pd.rows.push_back({Row::Kind::residual_p, false, b, sign, prob.feasible.tau_p, 0.0});
            pd.rows.push_back({Row::Kind::residual_q, false, b, sign, prob.feasible.tau_q, 0.0});
        }
    }

    for (int b : zone.boundary) {
        BoundaryFlow bf;
        bf.bus = b;
        for (size_t br = 0; br < prob.model->branches.size(); ++br) {
            const BranchRecord& rec = prob.model->branches[br];
            if (!rec.in_service) continue;
            if (rec.from == b && !zone.contains(rec.to)) bf.branches.push_back({static_cast<int>(br), true});
            if (rec.to == b && !zone.contains(rec.from)) bf.branches.push_back({static_cast<int>(br), false});
        }
        if (bf.branches.empty()) continue;  // boundary by graph but no in-service exterior branch
        for (const auto& [br, from_side] : bf.branches)
            bf.f0 += branch_active_flow(*prob.model, base.v, base.theta, br, from_side);
        const double band = prob.feasible.boundary_band(bf.f0);
        const int slot = static_cast<int>(pd.boundary.size());  // rows address the boundary slot
        pd.boundary.push_back(bf);
        for (double sign : {1.0, -1.0})
            pd.rows.push_back({Row::Kind::boundary, false, slot, sign, band, bf.f0});
    }

    double sum_p0 = 0.0, sum_q0 = 0.0;
    for (int b : zone.buses) {
        sum_p0 += base.p[b];
        sum_q0 += base.q[b];
        if (is_zi(zone, b)) {
            pd.cons_const_p += 0.0 - base.p[b];
            pd.cons_const_q += 0.0 - base.q[b];
        }
    }
    pd.cons_tol_p = prob.feasible.conservation_tol(sum_p0);
    pd.cons_tol_q = pd.cons_tol_p;  // shared tolerance, derived from the P sum
    for (double sign : {1.0, -1.0}) {
        pd.rows.push_back({Row::Kind::conservation_p, false, -1, sign, pd.cons_tol_p, 0.0});
        pd.rows.push_back({Row::Kind::conservation_q, false, -1, sign, pd.cons_tol_q, 0.0});
    }

    const FamilyConfig& fam = prob.family;
    if (fam.family == AttackFamily::corruption) {
        for (int b : zone.buses) {
            const double r0p = base.p[b] - pd.p0_inj[b];
            const double r0q = base.q[b] - pd.q0_inj[b];
            const double dp = std::max(fam.corruption.beta * std::abs(r0p), fam.corruption.eps_r);
            const double dq = std::max(fam.corruption.beta * std::abs(r0q), fam.corruption.eps_r);
            for (double sign : {1.0, -1.0}) {
                pd.rows.push_back({Row::Kind::corruption_p, false, b, sign, dp, r0p});
                pd.rows.push_back({Row::Kind::corruption_q, false, b, sign, dq, r0q});
            }
        }
    } else if (fam.family == AttackFamily::lra) {
        for (size_t g = 0; g < pd.layout.gen_pos.size(); ++g)
            pd.rows.push_back({Row::Kind::lra_link, true, static_cast<int>(g), 1.0, 0.0, 0.0});
        pd.rows.push_back({Row::Kind::lra_load_sum, true, -1, 1.0, 0.0, 0.0});
    } else if (fam.family == AttackFamily::line) {
        pd.line_targets =
            select_overload_targets(*prob.model, *prob.y, *prob.graph, zone, fam.line.max_lines);
    }
    return pd;
}

// Attacked state from the variable vector (exterior entries = baseline).
struct AssembledState {
    Vec p, q, v, theta;
};

AssembledState assemble(const ProblemData& pd, const Vec& x) {
    const Snapshot& base = *pd.prob->baseline;
    AssembledState st{base.p, base.q, base.v, base.theta};
    const Layout& lay = pd.layout;
    for (size_t k = 0; k < lay.zbus.size(); ++k) {
        const int bus = lay.zbus[k];
        if (lay.p_var[k] >= 0) {
            st.p[bus] += x[lay.p_var[k]];
            st.q[bus] += x[lay.q_var[k]];
        } else {
            st.p[bus] = 0.0;  // zero-injection pin
            st.q[bus] = 0.0;
        }
        st.v[bus] += x[lay.v_var[k]];
        st.theta[bus] += x[lay.th_var[k]];
    }
    return st;
}

// Sparse injection partials for a constraint bus wrt zone V/theta variables.
// Row `r` of jac gets scale * dInj contributions; the P^a/Q^a parts are added
// by the caller.
void add_injection_partials(const ProblemData& pd, const AssembledState& st, int bus, bool is_p,
                            double scale, Mat& jac, int r) {
    const Layout& lay = pd.layout;
    const auto& row = pd.prob->y->rows[bus];
    double d_vi = 0.0, d_thi = 0.0;
    for (const auto& e : row) {
        const int j = e.col;
        if (j == bus) {
            d_vi += is_p ? 2.0 * st.v[bus] * e.g : -2.0 * st.v[bus] * e.b;
            continue;
        }
        const double d = st.theta[bus] - st.theta[j];
        const double c = std::cos(d), s = std::sin(d);
        const double pc = e.g * c + e.b * s;
        const double ps = e.g * s - e.b * c;
        const double vv = st.v[bus] * st.v[j];
        if (is_p) {
            d_vi += st.v[j] * pc;
            d_thi += vv * (-e.g * s + e.b * c);
        } else {
            d_vi += st.v[j] * ps;
            d_thi += vv * pc;
        }
        const int pos_j = lay.zpos[j];
        if (pos_j >= 0) {
            const double d_vj = is_p ? st.v[bus] * pc : st.v[bus] * ps;
            const double d_thj = is_p ? -vv * (-e.g * s + e.b * c) : -vv * pc;
            jac(r, lay.v_var[pos_j]) += scale * d_vj;
            jac(r, lay.th_var[pos_j]) += scale * d_thj;
        }
    }
    const int pos_i = lay.zpos[bus];
    if (pos_i >= 0) {
        jac(r, lay.v_var[pos_i]) += scale * d_vi;
        jac(r, lay.th_var[pos_i]) += scale * d_thi;
    }
}

// Values (and optionally the Jacobian) of every constraint row at x.
void eval_rows(const ProblemData& pd, const Vec& x, const AssembledState& st, Vec& values, Mat* jac) {
    const Layout& lay = pd.layout;
    const int nr = static_cast<int>(pd.rows.size());
    values.resize(nr);
    if (jac) jac->setZero(nr, lay.n);

    // injections at constraint buses
    Vec p_inj = Vec::Zero(pd.prob->model->n_bus()), q_inj = p_inj;
    for (int b : pd.cbus) {
        double p = 0.0, q = 0.0;
        for (const auto& e : pd.prob->y->rows[b]) {
            const double d = st.theta[b] - st.theta[e.col];
            const double c = std::cos(d), s = std::sin(d);
            const double vv = st.v[b] * st.v[e.col];
            p += vv * (e.g * c + e.b * s);
            q += vv * (e.g * s - e.b * c);
        }
        p_inj[b] = p;
        q_inj[b] = q;
    }

    // boundary transfers
    std::vector<double> flows(pd.boundary.size(), 0.0);
    std::vector<std::array<double, 2>> flow_partials(pd.boundary.size(), {0.0, 0.0});
    for (size_t k = 0; k < pd.boundary.size(); ++k) {
        for (const auto& [br, from_side] : pd.boundary[k].branches) {
            const FlowPartials fp =
                branch_active_flow_partials(*pd.prob->model, st.v, st.theta, br, from_side);
            flows[k] += fp.value;
            flow_partials[k][0] += fp.dv_send;
            flow_partials[k][1] += fp.dth_send;
        }
    }

    double sum_dp = pd.cons_const_p, sum_dq = pd.cons_const_q;
    for (size_t k = 0; k < lay.zbus.size(); ++k) {
        if (lay.p_var[k] >= 0) {
            sum_dp += x[lay.p_var[k]];
            sum_dq += x[lay.q_var[k]];
        }
    }

    for (int r = 0; r < nr; ++r) {
        const Row& row = pd.rows[r];
        switch (row.kind) {
            case Row::Kind::residual_p:
            case Row::Kind::residual_q: {
                const bool is_p = row.kind == Row::Kind::residual_p;
                const double resid = is_p ? st.p[row.bus] - p_inj[row.bus]
                                          : st.q[row.bus] - q_inj[row.bus];
                values[r] = row.sign * resid - row.bound;
                if (jac) {
                    const int pos = lay.zpos[row.bus];
                    if (pos >= 0 && lay.p_var[pos] >= 0)
                        (*jac)(r, is_p ? lay.p_var[pos] : lay.q_var[pos]) += row.sign;
                    add_injection_partials(pd, st, row.bus, is_p, -row.sign, *jac, r);
                }
                break;
            }
            case Row::Kind::boundary: {
                const size_t k = static_cast<size_t>(row.bus);  // boundary slot
                values[r] = row.sign * (flows[k] - pd.boundary[k].f0) - row.bound;
                if (jac) {
                    const int pos = lay.zpos[pd.boundary[k].bus];
                    (*jac)(r, lay.v_var[pos]) += row.sign * flow_partials[k][0];
                    (*jac)(r, lay.th_var[pos]) += row.sign * flow_partials[k][1];
                }
                break;
            }
            case Row::Kind::conservation_p:
            case Row::Kind::conservation_q: {
                const bool is_p = row.kind == Row::Kind::conservation_p;
                values[r] = row.sign * (is_p ? sum_dp : sum_dq) - row.bound;
                if (jac)
                    for (size_t k = 0; k < lay.zbus.size(); ++k)
                        if (lay.p_var[k] >= 0)
                            (*jac)(r, is_p ? lay.p_var[k] : lay.q_var[k]) = row.sign;
                break;
            }
            case Row::Kind::corruption_p:
            case Row::Kind::corruption_q: {
                const bool is_p = row.kind == Row::Kind::corruption_p;
                const double resid = is_p ? st.p[row.bus] - p_inj[row.bus]
                                          : st.q[row.bus] - q_inj[row.bus];
                values[r] = row.sign * (resid - row.center) - row.bound;
                if (jac) {
                    const int pos = lay.zpos[row.bus];
                    if (pos >= 0 && lay.p_var[pos] >= 0)
                        (*jac)(r, is_p ? lay.p_var[pos] : lay.q_var[pos]) += row.sign;
                    add_injection_partials(pd, st, row.bus, is_p, -row.sign, *jac, r);
                }
                break;
            }
            case Row::Kind::lra_link: {
                const int g = row.bus;  // generator slot index
                const int pos = lay.gen_pos[g];
                values[r] = x[lay.p_var[pos]] - x[lay.gp_var[g]] + x[lay.gm_var[g]];
                if (jac) {
                    (*jac)(r, lay.p_var[pos]) = 1.0;
                    (*jac)(r, lay.gp_var[g]) = -1.0;
                    (*jac)(r, lay.gm_var[g]) = 1.0;
                }
                break;
            }
            case Row::Kind::lra_load_sum: {
                double s = 0.0;
                for (int pos : lay.load_pos) s += x[lay.p_var[pos]];
                values[r] = s;
                if (jac)
                    for (int pos : lay.load_pos) (*jac)(r, lay.p_var[pos]) = 1.0;
                break;
            }
        }
    }
}

// Family objective in minimization form (returns -f and fills -df/dx).
double objective_min(const ProblemData& pd, const Vec& x, Vec* grad) {
    const Layout& lay = pd.layout;
    const FamilyConfig& fam = pd.prob->family;
    if (grad) grad->setZero(lay.n);
    double f = 0.0;
    switch (fam.family) {
        case AttackFamily::simple:
        case AttackFamily::corruption: {
            for (size_t k = 0; k < lay.zbus.size(); ++k) {
                const double dv = x[lay.v_var[k]];
                const double dth = x[lay.th_var[k]];
                f += dv * dv + dth * dth;
                if (grad) {
                    (*grad)[lay.v_var[k]] -= 2.0 * dv;
                    (*grad)[lay.th_var[k]] -= 2.0 * dth;
                }
            }
            break;
        }
        case AttackFamily::line: {
            const Snapshot& base = *pd.prob->baseline;
            for (const auto& [i, j] : pd.line_targets) {
                const double bij = pd.prob->y->b_at(i, j);
                const int pi = lay.zpos[i], pj = lay.zpos[j];
                const double thi = base.theta[i] + (pi >= 0 ? x[lay.th_var[pi]] : 0.0);
                const double thj = base.theta[j] + (pj >= 0 ? x[lay.th_var[pj]] : 0.0);
                const double vi = base.v[i] + (pi >= 0 ? x[lay.v_var[pi]] : 0.0);
                const double vj = base.v[j] + (pj >= 0 ? x[lay.v_var[pj]] : 0.0);
                const double pline = -bij * (thi - thj);
                const double qline = std::abs(bij) * (vi - vj);
                f += pline * pline + qline * qline;
                if (grad) {
                    const double dth = 2.0 * pline * -bij;
                    const double dv = 2.0 * qline * std::abs(bij);
                    if (pi >= 0) {
                        (*grad)[lay.th_var[pi]] -= dth;
                        (*grad)[lay.v_var[pi]] -= dv;
                    }
                    if (pj >= 0) {
                        (*grad)[lay.th_var[pj]] += dth;
                        (*grad)[lay.v_var[pj]] += dv;
                    }
                }
            }
            break;
        }
        case AttackFamily::lra: {
            for (size_t g = 0; g < lay.gen_pos.size(); ++g) {
                const int bus = lay.zbus[lay.gen_pos[g]];
                const double cu = lra_cost_up(fam.lra, *pd.prob->model, bus);
                const double cd = lra_cost_down(fam.lra, *pd.prob->model, bus);
                f += cu * x[lay.gp_var[g]] - cd * x[lay.gm_var[g]];
                if (grad) {
                    (*grad)[lay.gp_var[g]] -= cu;
                    (*grad)[lay.gm_var[g]] += cd;
                }
            }
            for (int pos : lay.load_pos) {
                const double dp = x[lay.p_var[pos]];
                f += fam.lra.lambda * smooth_abs(dp);
                if (grad) (*grad)[lay.p_var[pos]] -= fam.lra.lambda * smooth_abs_grad(dp);
            }
            break;
        }
    }
    return -f;
}

double exact_violation(const ProblemData& pd, const Vec& row_values) {
    double v = pd.fixed_violation;
    for (size_t r = 0; r < pd.rows.size(); ++r)
        v = std::max(v, pd.rows[r].equality ? std::abs(row_values[r]) : row_values[r]);
    return std::max(v, 0.0);
}

struct AlState {
    Vec lam;  // one multiplier per row (>=0 for inequalities)
    double mu;
};

// AL value and gradient at x.
double eval_al(const ProblemData& pd, const AlState& al, const Vec& x, Vec& grad, Vec& row_values) {
    const AssembledState st = assemble(pd, x);
    Mat jac;
    eval_rows(pd, x, st, row_values, &jac);
    Vec obj_grad;
    double phi = objective_min(pd, x, &obj_grad);
    grad = obj_grad;
    for (size_t r = 0; r < pd.rows.size(); ++r) {
        const double g = row_values[r];
        if (pd.rows[r].equality) {
            phi += al.lam[r] * g + 0.5 * al.mu * g * g;
            grad += (al.lam[r] + al.mu * g) * jac.row(r).transpose();
        } else {
            const double t = std::max(0.0, al.lam[r] + al.mu * g);
            phi += (t * t - al.lam[r] * al.lam[r]) / (2.0 * al.mu);
            if (t > 0.0) grad += t * jac.row(r).transpose();
        }
    }
    return phi;
}

Vec project(const Layout& lay, Vec x) {
    for (int i = 0; i < lay.n; ++i) x[i] = std::clamp(x[i], lay.lo[i], lay.hi[i]);
    return x;
}

// Projected L-BFGS with Armijo backtracking along projected steps.
void inner_minimize(const ProblemData& pd, const AlState& al, Vec& x, const AlOptions& opts) {
    const Layout& lay = pd.layout;
    Vec grad, row_values;
    double phi = eval_al(pd, al, x, grad, row_values);

    std::deque<std::pair<Vec, Vec>> history;  // (s, y)
    for (int it = 0; it < opts.max_inner; ++it) {
        const Vec pg = x - project(lay, x - grad);
        if (pg.lpNorm<Eigen::Infinity>() < opts.inner_tol) break;

        // two-loop recursion
        Vec d = -grad;
        std::vector<double> alpha(history.size());
        for (int h = static_cast<int>(history.size()) - 1; h >= 0; --h) {
            const auto& [s, ygrad] = history[h];
            const double rho = 1.0 / ygrad.dot(s);
            alpha[h] = rho * s.dot(d);
            d -= alpha[h] * ygrad;
        }
        if (!history.empty()) {
            const auto& [s, ygrad] = history.back();
            d *= s.dot(ygrad) / ygrad.dot(ygrad);
        }
        for (size_t h = 0; h < history.size(); ++h) {
            const auto& [s, ygrad] = history[h];
            const double rho = 1.0 / ygrad.dot(s);
            const double beta = rho * ygrad.dot(d);
            d += (alpha[h] - beta) * s;
        }
        if (d.dot(grad) > -1e-18) d = -grad;

        double step = 1.0;
        Vec x_new, grad_new, rows_new;
        double phi_new = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = project(lay, x + step * d);
            const Vec dx = x_new - x;
            if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
            phi_new = eval_al(pd, al, x_new, grad_new, rows_new);
            if (phi_new <= phi + 1e-4 * grad.dot(dx)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (d != -grad) {  // steepest-descent retry
                d = -grad;
                step = 1.0;
                for (int ls = 0; ls < 40; ++ls) {
                    x_new = project(lay, x + step * d);
                    const Vec dx = x_new - x;
                    if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
                    phi_new = eval_al(pd, al, x_new, grad_new, rows_new);
                    if (phi_new <= phi + 1e-4 * grad.dot(dx)) {
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
            }
            if (!accepted) break;
        }
        const Vec s = x_new - x;
        const Vec ygrad = grad_new - grad;
        if (s.dot(ygrad) > 1e-12 * s.norm() * ygrad.norm()) {
            history.push_back({s, ygrad});
            if (history.size() > 10) history.pop_front();
        }
        x = x_new;
        grad = grad_new;
        phi = phi_new;
    }
}

}  // namespace

AttackResult solve_attack(const AttackProblem& prob, const AlOptions& opts) {
    prob.feasible.validate();
    prob.family.validate();

    AttackResult result;
    result.family = prob.family.family;
    result.zone_id = prob.zone->id;
    result.attacked = *prob.baseline;
    result.attacked.kind = "attacked:" + family_name(prob.family.family);
    result.attacked.family = family_name(prob.family.family);
    result.attacked.zone_id = prob.zone->id;
    result.attacked.p_clean.resize(0);
    result.attacked.q_clean.resize(0);

    if (prob.family.family == AttackFamily::lra) {
        const LraBuses gl = lra_buses(*prob.model, *prob.zone);
        if (gl.gen.empty() && gl.load.empty()) {
            result.status = SolveStatus::skipped;
            result.diagnostic = "LRA inapplicable: zone has no generator or load buses";
            return result;
        }
    }

    ProblemData pd = build_problem(prob);
    const double baseline_objective = attack_objective_value(prob, *prob.baseline);

    if (pd.fixed_violation > opts.feas_tol) {
        result.status = SolveStatus::infeasible;
        result.diagnostic = "fixed exterior residual exceeds stealth threshold by " +
                            std::to_string(pd.fixed_violation);
        result.report = verify_result(prob, result.attacked, opts.feas_tol);
        return result;
    }

    AlState al{Vec::Zero(static_cast<int>(pd.rows.size())), opts.mu0};
    Vec x = project(pd.layout, Vec::Zero(pd.layout.n));

    auto exact_eval = [&](const Vec& xx) {
        const AssembledState st = assemble(pd, xx);
        Vec values;
        eval_rows(pd, xx, st, values, nullptr);
        Snapshot snap = result.attacked;
        snap.p = st.p;
        snap.q = st.q;
        snap.v = st.v;
        snap.theta = st.theta;
        return std::tuple<double, double, Snapshot>(exact_violation(pd, values),
                                                    attack_objective_value(prob, snap),
                                                    std::move(snap));
    };

    bool have_best = false;
    double best_objective = 0.0;
    Snapshot best_snapshot;
    auto consider = [&](const Vec& xx) {
        auto [viol, obj, snap] = exact_eval(xx);
        if (viol <= opts.feas_tol && (!have_best || obj > best_objective)) {
            have_best = true;
            best_objective = obj;
            best_snapshot = std::move(snap);
        }
        return viol;
    };

    double prev_viol = consider(x);
    auto eng = make_engine(prob.rng_seed, 0xa77ac4);
    int stall_count = 0;
    double last_best = have_best ? best_objective : std::numeric_limits<double>::quiet_NaN();

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        const Vec x_before = x;
        inner_minimize(pd, al, x, opts);
        const bool stalled = (x - x_before).lpNorm<Eigen::Infinity>() < 1e-14;
        const bool no_gain = !have_best || best_objective <= baseline_objective + 1e-12;
        if (stalled && (no_gain || prev_viol > opts.feas_tol)) {
            // The deviation objectives have a critical point at the baseline
            // itself, so a stalled run is kicked off it (and off any later
            // dead point) with a small seeded perturbation; the augmented
            // Lagrangian repairs feasibility afterwards.
            for (int i = 0; i < pd.layout.n; ++i) {
                const double span = std::min(pd.layout.hi[i] - pd.layout.lo[i], 0.02);
                x[i] += span * (uniform01(eng) - 0.5) * 0.1;
            }
            x = project(pd.layout, x);
            inner_minimize(pd, al, x, opts);
        }

        const AssembledState st = assemble(pd, x);
        Vec values;
        eval_rows(pd, x, st, values, nullptr);
        const double viol = exact_violation(pd, values);
        consider(x);
        result.best_feasible_trace.push_back(have_best ? best_objective
                                                       : std::numeric_limits<double>::quiet_NaN());

        if (have_best) {
            const double change = std::isnan(last_best)
                                      ? std::numeric_limits<double>::infinity()
                                      : std::abs(best_objective - last_best) /
                                            std::max(1.0, std::abs(best_objective));
            if (viol <= opts.feas_tol && change < opts.obj_stall_rel) {
                if (++stall_count >= opts.stall_outers) break;
            } else {
                stall_count = 0;
            }
            last_best = best_objective;
        }

        // multiplier and penalty updates
        for (size_t r = 0; r < pd.rows.size(); ++r) {
            if (pd.rows[r].equality)
                al.lam[r] += al.mu * values[r];
            else
                al.lam[r] = std::max(0.0, al.lam[r] + al.mu * values[r]);
        }
        if (viol > 0.25 * prev_viol && viol > opts.feas_tol)
            al.mu = std::min(al.mu * opts.mu_growth, opts.mu_max);
        prev_viol = viol;
    }

    if (!have_best) {
        result.status = SolveStatus::infeasible;
        result.diagnostic = "no feasible iterate found";
        result.report = verify_result(prob, result.attacked, opts.feas_tol);
        return result;
    }
    if (best_objective <= baseline_objective + 1e-12) {
        result.status = SolveStatus::degenerate;
        result.objective = baseline_objective;
        result.diagnostic = "no feasible improvement over the baseline";
        result.report = verify_result(prob, result.attacked, opts.feas_tol);
        return result;
    }
    result.status = SolveStatus::success;
    result.objective = best_objective;
    result.attacked.p = best_snapshot.p;
    result.attacked.q = best_snapshot.q;
    result.attacked.v = best_snapshot.v;
    result.attacked.theta = best_snapshot.theta;
    result.attacked.objective = best_objective;
    result.report = verify_result(prob, result.attacked, opts.feas_tol);
    result.attacked.max_violation = result.report.max_violation;
    return result;
}

}  // namespace gridshield
