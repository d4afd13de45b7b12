#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "gridshield/case_model.hpp"

namespace gridshield {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Nodal admittance matrix Y = G + jB stored sparse by structure:
// one sorted row of (col, g, b) entries per bus, diagonal always present.
struct Admittance {
    struct Entry {
        int col;
        double g, b;
    };
    int n = 0;
    std::vector<std::vector<Entry>> rows;

    double g_at(int i, int j) const;
    double b_at(int i, int j) const;
    std::pair<Mat, Mat> to_dense() const;
};

// Undirected adjacency over in-service branches, self-loops dropped,
// parallel branches collapsed.
struct GridGraph {
    std::vector<std::vector<int>> adj;
    int n() const { return static_cast<int>(adj.size()); }
    bool connected_subset(const std::vector<int>& buses) const;
};

GridGraph build_grid_graph(const NetworkModel& model);

// Standard Y-bus assembly: series y = 1/(r+jx), half line charging jb/2,
// MATPOWER tap/phase-shift convention, bus shunts on the diagonal.
// Throws ValidationError on an in-service branch with r = x = 0.
Admittance build_admittance(const NetworkModel& model);

// AC power injection reconstruction:
//   P_i = sum_j V_i V_j (G_ij cos(th_i - th_j) + B_ij sin(th_i - th_j))
//   Q_i = sum_j V_i V_j (G_ij sin(th_i - th_j) - B_ij cos(th_i - th_j))
// evaluated over the nonzero pattern of Y.
void ac_injections(const Vec& v, const Vec& theta, const Admittance& y, Vec& p_out, Vec& q_out);
std::pair<Vec, Vec> ac_injections(const Vec& v, const Vec& theta, const Admittance& y);

// Dense reference evaluation over full G/B matrices (cross-check path).
std::pair<Vec, Vec> ac_injections_dense(const Vec& v, const Vec& theta, const Mat& g, const Mat& b);

// Accumulates d(lam_p . P + lam_q . Q)/dV and /dtheta into dv/dtheta.
// Reverse-mode adjoint of ac_injections; single O(nnz) pass.
void ac_injection_adjoint(const Vec& v, const Vec& theta, const Admittance& y,
                          const Vec& lam_p, const Vec& lam_q, Vec& dv, Vec& dtheta);

// 2x2 branch admittance block (yff, yft, ytf, ytt) of the pi model.
struct BranchY {
    std::complex<double> ff, ft, tf, tt;
};
BranchY branch_admittance(const BranchRecord& br);

// Active power leaving the given end of a branch (pi model, full AC).
// side_from = true measures at the "from" end.
double branch_active_flow(const NetworkModel& model, const Vec& v, const Vec& theta,
                          int branch_idx, bool side_from = true);

// Partial derivatives of the same flow wrt the sending-side V and theta.
struct FlowPartials {
    double value;
    double dv_send, dth_send;
    double dv_recv, dth_recv;
};
FlowPartials branch_active_flow_partials(const NetworkModel& model, const Vec& v, const Vec& theta,
                                         int branch_idx, bool side_from);

}  // namespace gridshield
