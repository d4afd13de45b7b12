#pragma once

#include <map>
#include <numbers>
#include <optional>

#include "gridshield/zones.hpp"

namespace gridshield {

// Shared feasible-set parameters (residual stealth thresholds, boundary
// transfer band, conservation rule, operational limits).
struct FeasibleSetConfig {
    double tau_p = 0.0, tau_q = 0.0;  // from residual_scales
    double eps_bnd_rel = 0.03, eps_bnd_abs = 0.01;
    double v_min = 0.95, v_max = 1.05;
    double theta_min = -std::numbers::pi, theta_max = std::numbers::pi;
    double cons_rel = 1e-3, cons_abs = 1e-3;

    void validate() const;
    double boundary_band(double f0) const { return std::max(eps_bnd_rel * std::abs(f0), eps_bnd_abs); }
    double conservation_tol(double sum_p0) const {
        return std::max(cons_rel * std::abs(sum_p0), cons_abs);
    }
};

enum class AttackFamily { simple, lra, line, corruption };
std::string family_name(AttackFamily f);
AttackFamily family_from_name(const std::string& name);

struct SimpleConfig {
    double kappa_p = 0.75, kappa_q = 0.75;
    double delta_p = 0.01, delta_q = 0.01;
};

struct LraConfig {
    double gen_cap = 0.5, gen_fallback = 0.5;
    double load_cap = 0.3, load_fallback = 0.3;
    double lambda = 0.1;
    // optional external generation cost vectors indexed by internal bus;
    // empty -> bus-index heuristic id/N_bus for both directions
    std::vector<double> cost_up, cost_down;
};

struct LineOverloadConfig {
    int max_lines = 3;
};

struct CorruptionConfig {
    double beta = 0.05;
    double eps_r = 1e-3;
};

struct FamilyConfig {
    AttackFamily family = AttackFamily::simple;
    SimpleConfig simple;
    LraConfig lra;
    LineOverloadConfig line;
    CorruptionConfig corruption;

    void validate() const;
};

struct AttackProblem {
    const NetworkModel* model = nullptr;
    const Admittance* y = nullptr;
    const GridGraph* graph = nullptr;
    const Snapshot* baseline = nullptr;
    const AttackZone* zone = nullptr;
    FeasibleSetConfig feasible;
    FamilyConfig family;
    uint64_t rng_seed = 0;  // inner-solver restarts only
};

enum class SolveStatus { success, degenerate, infeasible, skipped };
std::string status_name(SolveStatus s);

struct FeasibilityReport {
    std::map<std::string, double> group_violation;  // max violation per constraint group
    double max_violation = 0.0;
    std::string worst_group;
    bool pass = false;
};

struct AttackResult {
    Snapshot attacked;
    AttackFamily family = AttackFamily::simple;
    int zone_id = 0;
    double objective = 0.0;
    SolveStatus status = SolveStatus::infeasible;
    FeasibilityReport report;
    std::vector<double> best_feasible_trace;  // best feasible objective per outer iteration
    std::string diagnostic;
};

// Target line set for the line-overload family: up to max_lines in-zone or
// boundary-interface bus pairs by descending |B_ij| (Y-bus entries), greedily
// keeping the selected set connected on the line-endpoint graph.
std::vector<std::pair<int, int>> select_overload_targets(const NetworkModel& model,
                                                         const Admittance& y, const GridGraph& graph,
                                                         const AttackZone& zone, int max_lines);

// Family objective values evaluated exactly on full attacked/baseline
// snapshots (used by the verifier and for reporting; the solver keeps its own
// smoothed internal form).
double attack_objective_value(const AttackProblem& prob, const Snapshot& attacked);

// LRA helpers shared by solver/verifier: generator buses are zone buses with
// an in-service generator; load buses are the remaining non-zero-injection
// zone buses.
struct LraBuses {
    std::vector<int> gen, load;
};
LraBuses lra_buses(const NetworkModel& model, const AttackZone& zone);
double lra_cost_up(const LraConfig& cfg, const NetworkModel& model, int bus);
double lra_cost_down(const LraConfig& cfg, const NetworkModel& model, int bus);
double lra_gen_cap_abs(const LraConfig& cfg, double p0);
double lra_load_cap_abs(const LraConfig& cfg, double p0);

}  // namespace gridshield
