#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gridshield/admittance.hpp"
#include "gridshield/powerflow.hpp"

namespace gridshield {

// One operating point. p/q are the measured (possibly noisy or attacked)
// injections the estimator sees; v/theta are exact state labels.
// p_clean/q_clean retain the pre-noise injections for clean snapshots.
struct Snapshot {
    Vec p, q, v, theta;
    std::string kind = "clean";  // clean | attacked:<family> | perturbed
    uint64_t seed = 0;
    Vec p_clean, q_clean;  // provenance, empty for non-clean rows

    // attack metadata (attacked rows only)
    std::string family;
    int zone_id = -1;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double max_violation = std::numeric_limits<double>::quiet_NaN();
};

struct SnapshotSet {
    int n_bus = 0;
    std::vector<Snapshot> rows;
    size_t size() const { return rows.size(); }
};

struct SnapshotSetConfig {
    int n_samples = 14822;
    double load_scale_lo = 0.85, load_scale_hi = 1.15;  // global multiplicative draw
    double per_bus_jitter_sigma = 0.03;                 // relative Gaussian jitter
    double noise_sigma_pq = 0.01;                       // additive measurement noise, p.u.
    uint64_t rng_seed = 1;

    void validate() const;
};

// Generates clean steady-state snapshots: scale loads, jitter per bus,
// redispatch PV generation proportionally, re-solve the power flow, record
// the exact state as labels and noisy injections as inputs. Samples that do
// not converge are dropped (aborts if more than 10% fail). Deterministic in
// rng_seed; parallel and serial runs produce identical datasets.
SnapshotSet generate_snapshots(const NetworkModel& model, const Admittance& y,
                               const SnapshotSetConfig& cfg, int threads = 0);

struct ResidualScales {
    double tau_bar_p = 0.0, tau_bar_q = 0.0;  // max residual magnitudes, floored
    double tau_p = 0.0, tau_q = 0.0;          // 0.95 * tau_bar
};

// Residual scales over a clean dataset: tau_bar = max_i,n |measured - AC
// reconstruction|, floored at `floor`; tau = 0.95 tau_bar.
ResidualScales residual_scales(const SnapshotSet& set, const Admittance& y, double floor = 0.01);

// Columnar CSV: P_1..P_n,Q_1..Q_n,V_1..V_n,th_1..th_n,kind,seed plus
// family,zone_id,objective,max_violation when attack metadata is present.
void write_snapshot_csv(const SnapshotSet& set, const std::string& path);
SnapshotSet read_snapshot_csv(const std::string& path);

}  // namespace gridshield
