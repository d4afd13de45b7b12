#include "gridshield/admittance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

namespace gridshield {

namespace {

// Accumulates Y entries in a map first, then freezes into sorted rows.
struct Builder {
    int n;
    std::vector<std::map<int, std::complex<double>>> acc;
    explicit Builder(int n_bus) : n(n_bus), acc(n_bus) {}
    void add(int i, int j, std::complex<double> y) { acc[i][j] += y; }
    Admittance freeze() const {
        Admittance out;
        out.n = n;
        out.rows.resize(n);
        for (int i = 0; i < n; ++i) {
            auto row = acc[i];
            row.try_emplace(i, 0.0);  // diagonal always present
            out.rows[i].reserve(row.size());
            for (const auto& [col, y] : row) out.rows[i].push_back({col, y.real(), y.imag()});
        }
        return out;
    }
};

}  // namespace

double Admittance::g_at(int i, int j) const {
    for (const auto& e : rows[i])
        if (e.col == j) return e.g;
    return 0.0;
}

double Admittance::b_at(int i, int j) const {
    for (const auto& e : rows[i])
        if (e.col == j) return e.b;
    return 0.0;
}

std::pair<Mat, Mat> Admittance::to_dense() const {
    Mat g = Mat::Zero(n, n), b = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (const auto& e : rows[i]) {
            g(i, e.col) = e.g;
            b(i, e.col) = e.b;
        }
    return {g, b};
}

GridGraph build_grid_graph(const NetworkModel& model) {
    GridGraph graph;
    graph.adj.resize(model.n_bus());
    for (const auto& br : model.branches) {
        if (!br.in_service || br.from == br.to) continue;
        graph.adj[br.from].push_back(br.to);
        graph.adj[br.to].push_back(br.from);
    }
    for (auto& nbrs : graph.adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return graph;
}

bool GridGraph::connected_subset(const std::vector<int>& buses) const {
    if (buses.empty()) return true;
    std::vector<char> in_set(n(), 0), seen(n(), 0);
    for (int b : buses) in_set[b] = 1;
    std::queue<int> q;
    q.push(buses[0]);
    seen[buses[0]] = 1;
    size_t reached = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int w : adj[u])
            if (in_set[w] && !seen[w]) {
                seen[w] = 1;
                ++reached;
                q.push(w);
            }
    }
    return reached == buses.size();
}

BranchY branch_admittance(const BranchRecord& br) {
    if (br.r == 0.0 && br.x == 0.0)
        throw ValidationError("zero-impedance branch " + std::to_string(br.from_id) + "-" +
                              std::to_string(br.to_id));
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> half_charge(0.0, br.b / 2.0);
    const double ratio = br.tap == 0.0 ? 1.0 : br.tap;
    const std::complex<double> tap = std::polar(ratio, br.shift);
    BranchY out;
    out.tt = y + half_charge;
    out.ff = out.tt / (ratio * ratio);
    out.ft = -y / std::conj(tap);
    out.tf = -y / tap;
    return out;
}

Admittance build_admittance(const NetworkModel& model) {
    Builder builder(model.n_bus());
    for (const auto& br : model.branches) {
        if (!br.in_service) continue;
        const BranchY y = branch_admittance(br);
        builder.add(br.from, br.from, y.ff);
        builder.add(br.from, br.to, y.ft);
        builder.add(br.to, br.from, y.tf);
        builder.add(br.to, br.to, y.tt);
    }
    for (int i = 0; i < model.n_bus(); ++i)
        builder.add(i, i, {model.buses[i].gs, model.buses[i].bs});
    return builder.freeze();
}

void ac_injections(const Vec& v, const Vec& theta, const Admittance& y, Vec& p_out, Vec& q_out) {
    if (v.size() != y.n || theta.size() != y.n)
        throw ValidationError("ac_injections: state dimension does not match admittance");
    p_out.setZero(y.n);
    q_out.setZero(y.n);
    for (int i = 0; i < y.n; ++i) {
        double p = 0.0, q = 0.0;
        for (const auto& e : y.rows[i]) {
            const double d = theta[i] - theta[e.col];
            const double c = std::cos(d), s = std::sin(d);
            const double vv = v[i] * v[e.col];
            p += vv * (e.g * c + e.b * s);
            q += vv * (e.g * s - e.b * c);
        }
        p_out[i] = p;
        q_out[i] = q;
    }
}

std::pair<Vec, Vec> ac_injections(const Vec& v, const Vec& theta, const Admittance& y) {
    Vec p, q;
    ac_injections(v, theta, y, p, q);
    return {p, q};
}

std::pair<Vec, Vec> ac_injections_dense(const Vec& v, const Vec& theta, const Mat& g, const Mat& b) {
    const int n = static_cast<int>(v.size());
    Vec p = Vec::Zero(n), q = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = theta[i] - theta[j];
            const double vv = v[i] * v[j];
            p[i] += vv * (g(i, j) * std::cos(d) + b(i, j) * std::sin(d));
            q[i] += vv * (g(i, j) * std::sin(d) - b(i, j) * std::cos(d));
        }
    return {p, q};
}

void ac_injection_adjoint(const Vec& v, const Vec& theta, const Admittance& y,
                          const Vec& lam_p, const Vec& lam_q, Vec& dv, Vec& dtheta) {
    for (int i = 0; i < y.n; ++i) {
        const double lp = lam_p[i], lq = lam_q[i];
        if (lp == 0.0 && lq == 0.0) continue;
        for (const auto& e : y.rows[i]) {
            const int j = e.col;
            if (j == i) {
                dv[i] += lp * 2.0 * v[i] * e.g - lq * 2.0 * v[i] * e.b;
                continue;
            }
            const double d = theta[i] - theta[j];
            const double c = std::cos(d), s = std::sin(d);
            const double pc = e.g * c + e.b * s;   // cos-form coupling
            const double ps = e.g * s - e.b * c;   // sin-form coupling
            // P term: v_i v_j pc ; Q term: v_i v_j ps
            dv[i] += v[j] * (lp * pc + lq * ps);
            dv[j] += v[i] * (lp * pc + lq * ps);
            const double vv = v[i] * v[j];
            const double dp_dthi = vv * (-e.g * s + e.b * c);
            const double dq_dthi = vv * pc;
            dtheta[i] += lp * dp_dthi + lq * dq_dthi;
            dtheta[j] -= lp * dp_dthi + lq * dq_dthi;
        }
    }
}

double branch_active_flow(const NetworkModel& model, const Vec& v, const Vec& theta,
                          int branch_idx, bool side_from) {
    return branch_active_flow_partials(model, v, theta, branch_idx, side_from).value;
}

FlowPartials branch_active_flow_partials(const NetworkModel& model, const Vec& v, const Vec& theta,
                                         int branch_idx, bool side_from) {
    const BranchRecord& br = model.branches.at(branch_idx);
    if (!br.in_service) throw ValidationError("branch_active_flow on out-of-service branch");
    const BranchY y = branch_admittance(br);
    const int s = side_from ? br.from : br.to;
    const int r = side_from ? br.to : br.from;
    const std::complex<double> y_ss = side_from ? y.ff : y.tt;
    const std::complex<double> y_sr = side_from ? y.ft : y.tf;
    // P_s = g_ss V_s^2 + V_s V_r (A cos d + B sin d), d = th_s - th_r,
    // with A = Re(y_sr), B = Im(y_sr) entering via conj in S = V conj(I).
    const double a = y_sr.real(), b = y_sr.imag();
    const double d = theta[s] - theta[r];
    const double c = std::cos(d), sn = std::sin(d);
    FlowPartials out;
    out.value = y_ss.real() * v[s] * v[s] + v[s] * v[r] * (a * c + b * sn);
    out.dv_send = 2.0 * y_ss.real() * v[s] + v[r] * (a * c + b * sn);
    out.dth_send = v[s] * v[r] * (-a * sn + b * c);
    out.dv_recv = v[s] * (a * c + b * sn);
    out.dth_recv = -out.dth_send;
    return out;
}

}  // namespace gridshield
