#include "gridshield/verify.hpp"

#include <algorithm>
#include <cmath>

namespace gridshield {

FeasibilityReport verify_feasibility(const NetworkModel& model, const Admittance& y,
                                     const GridGraph& graph [[maybe_unused]], const Snapshot& baseline,
                                     const Snapshot& attacked, const AttackZone& zone,
                                     const FeasibleSetConfig& feasible, const FamilyConfig& family,
                                     double tol) {
    FeasibilityReport report;
    auto note = [&](const std::string& group, double violation) {
        double& slot = report.group_violation[group];
        slot = std::max(slot, std::max(0.0, violation));
    };

    const auto [p_inj, q_inj] = ac_injections(attacked.v, attacked.theta, y);
    const auto [p0_inj, q0_inj] = ac_injections(baseline.v, baseline.theta, y);

    // residual stealth on every bus
    note("residual_p", 0.0);
    note("residual_q", 0.0);
    for (int b = 0; b < model.n_bus(); ++b) {
        note("residual_p", std::abs(attacked.p[b] - p_inj[b]) - feasible.tau_p);
        note("residual_q", std::abs(attacked.q[b] - q_inj[b]) - feasible.tau_q);
    }

    // boundary transfer preservation per boundary bus (active flow toward
    // adjacent exterior buses)
    note("boundary_transfer", 0.0);
    for (int b : zone.boundary) {
        double f0 = 0.0, fa = 0.0;
        bool any = false;
        for (size_t br = 0; br < model.branches.size(); ++br) {
            const BranchRecord& rec = model.branches[br];
            if (!rec.in_service) continue;
            const bool from_here = rec.from == b && !zone.contains(rec.to);
            const bool to_here = rec.to == b && !zone.contains(rec.from);
            if (!from_here && !to_here) continue;
            any = true;
            f0 += branch_active_flow(model, baseline.v, baseline.theta, static_cast<int>(br), from_here);
            fa += branch_active_flow(model, attacked.v, attacked.theta, static_cast<int>(br), from_here);
        }
        if (any) note("boundary_transfer", std::abs(fa - f0) - feasible.boundary_band(f0));
    }

    // regional conservation with the shared tolerance
    double sum_p0 = 0.0, dp = 0.0, dq = 0.0;
    for (int b : zone.buses) {
        sum_p0 += baseline.p[b];
        dp += attacked.p[b] - baseline.p[b];
        dq += attacked.q[b] - baseline.q[b];
    }
    const double cons = feasible.conservation_tol(sum_p0);
    note("conservation_p", std::abs(dp) - cons);
    note("conservation_q", std::abs(dq) - cons);

    // operational limits on the attacked zone state
    note("voltage_bounds", 0.0);
    note("angle_bounds", 0.0);
    for (int b : zone.buses) {
        note("voltage_bounds",
             std::max(feasible.v_min - attacked.v[b], attacked.v[b] - feasible.v_max));
        note("angle_bounds",
             std::max(feasible.theta_min - attacked.theta[b], attacked.theta[b] - feasible.theta_max));
    }

    // zero-injection equalities
    note("zero_injection", 0.0);
    for (int b : zone.zero_injection)
        note("zero_injection", std::max(std::abs(attacked.p[b]), std::abs(attacked.q[b])));

    // exterior buses must be untouched
    double ext = 0.0;
    for (int b = 0; b < model.n_bus(); ++b) {
        if (zone.contains(b)) continue;
        ext = std::max({ext, std::abs(attacked.p[b] - baseline.p[b]),
                        std::abs(attacked.q[b] - baseline.q[b]),
                        std::abs(attacked.v[b] - baseline.v[b]),
                        std::abs(attacked.theta[b] - baseline.theta[b])});
    }
    note("exterior_fixed", ext);

    switch (family.family) {
        case AttackFamily::simple: {
            note("simple_envelope_p", 0.0);
            note("simple_envelope_q", 0.0);
            for (int b : zone.buses) {
                const double pe =
                    family.simple.kappa_p * std::max(std::abs(baseline.p[b]), family.simple.delta_p);
                const double qe =
                    family.simple.kappa_q * std::max(std::abs(baseline.q[b]), family.simple.delta_q);
                note("simple_envelope_p", std::abs(attacked.p[b] - baseline.p[b]) - pe);
                note("simple_envelope_q", std::abs(attacked.q[b] - baseline.q[b]) - qe);
            }
            break;
        }
        case AttackFamily::corruption: {
            note("corruption_match_p", 0.0);
            note("corruption_match_q", 0.0);
            for (int b : zone.buses) {
                const double r0p = baseline.p[b] - p0_inj[b];
                const double r0q = baseline.q[b] - q0_inj[b];
                const double dtp = std::max(family.corruption.beta * std::abs(r0p), family.corruption.eps_r);
                const double dtq = std::max(family.corruption.beta * std::abs(r0q), family.corruption.eps_r);
                note("corruption_match_p", std::abs((attacked.p[b] - p_inj[b]) - r0p) - dtp);
                note("corruption_match_q", std::abs((attacked.q[b] - q_inj[b]) - r0q) - dtq);
            }
            break;
        }
        case AttackFamily::lra: {
            const LraBuses gl = lra_buses(model, zone);
            note("lra_gen_cap", 0.0);
            note("lra_load_cap", 0.0);
            double load_sum = 0.0;
            for (int b : gl.gen)
                note("lra_gen_cap", std::abs(attacked.p[b] - baseline.p[b]) -
                                        lra_gen_cap_abs(family.lra, baseline.p[b]));
            for (int b : gl.load) {
                const double d = attacked.p[b] - baseline.p[b];
                load_sum += d;
                note("lra_load_cap", std::abs(d) - lra_load_cap_abs(family.lra, baseline.p[b]));
            }
            note("lra_load_sum", std::abs(load_sum));
            break;
        }
        case AttackFamily::line:
            break;  // objective-only family, no extra constraints
    }

    for (const auto& [group, violation] : report.group_violation) {
        if (violation > report.max_violation) {
            report.max_violation = violation;
            report.worst_group = group;
        }
    }
    report.pass = report.max_violation <= tol;
    return report;
}

FeasibilityReport verify_result(const AttackProblem& problem, const Snapshot& attacked, double tol) {
    return verify_feasibility(*problem.model, *problem.y, *problem.graph, *problem.baseline,
                              attacked, *problem.zone, problem.feasible, problem.family, tol);
}

}  // namespace gridshield
