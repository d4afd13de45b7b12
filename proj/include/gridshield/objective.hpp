#pragma once

#include <array>

#include "gridshield/mlp.hpp"
#include "gridshield/snapshot.hpp"

namespace gridshield {

enum class Regime { dynamic, fixed, frozen };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

// Component order everywhere: p, q, v, theta. p/q are the physics role,
// v/theta the data role.
inline constexpr int kCompP = 0, kCompQ = 1, kCompV = 2, kCompTheta = 3;

// Trainable clipped log-uncertainties and their derived inverse-variance
// weights w_m = exp(-2 clip(s_m)). In fixed/frozen regimes s never moves.
struct UncertaintyState {
    std::array<double, 4> s{0.0, 0.0, 0.0, 0.0};
    double s_min = -4.0, s_max = 2.0;
    Regime regime = Regime::dynamic;

    double clipped(int m) const { return std::clamp(s[m], s_min, s_max); }
    double weight(int m) const { return std::exp(-2.0 * clipped(m)); }
    bool clip_active(int m) const { return s[m] <= s_min || s[m] >= s_max; }
    double w_phys() const { return weight(kCompP) + weight(kCompQ); }
    double w_data() const { return weight(kCompV) + weight(kCompTheta); }
};

// Normalized squared error (1/d) sum ((a_k-b_k)/(sigma+eps))^2 where sigma is
// the population std of the reference block. The two-argument form derives
// sigma from `a` itself; the explicit-sigma form is used with batch-flattened
// moments.
double normalized_loss(const Vec& a, const Vec& b, double eps_norm);
double normalized_loss(const Vec& a, const Vec& b, double sigma_ref, double eps_norm);

double population_std(const Mat& block);

struct ComponentLosses {
    double l[4] = {0, 0, 0, 0};
    double& lp() { return l[kCompP]; }
    double& lq() { return l[kCompQ]; }
    double& lv() { return l[kCompV]; }
    double& ltheta() { return l[kCompTheta]; }
};

// Training batch: inputs plus state labels.
struct Batch {
    Mat x;        // N x 2n, measured [P,Q]
    Mat v_label;  // N x n
    Mat th_label; // N x n
    int rows() const { return static_cast<int>(x.rows()); }
};

Batch make_batch(const SnapshotSet& set, const std::vector<int>& indices);

// The four loss components: physics compares predicted (P,Q) heads against
// AC reconstructions of the predicted state; data compares state heads
// against labels. All use batch-flattened reference moments.
ComponentLosses component_losses(const MlpParams& params, const Batch& batch, const Admittance& y,
                                 double eps_norm);

struct ObjectiveParts {
    double total = 0.0;
    double j_dyn = 0.0;
    double p_ratio = 0.0;
    double w[4] = {0, 0, 0, 0};
    double w_phys = 0.0, w_data = 0.0;
    double ratio = 0.0;  // W_phys / (W_data + eps)
    double delta = 0.0;  // log(r_star+eps) - log(r+eps)
};

// J_dyn = sum_m (0.5 e^{-2 s_m^clip} L_m + s_m^clip) plus the one-sided
// log-ratio safeguard P_ratio = lambda_r max(0, Delta)^2 with target ratio
// r_star = n_phys/n_data = 1.
ObjectiveParts dynamic_objective(const ComponentLosses& losses, const UncertaintyState& u,
                                 double lambda_r, double eps_ratio);

}  // namespace gridshield
