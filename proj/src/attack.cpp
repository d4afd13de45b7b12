#include "gridshield/attack.hpp"

#include <algorithm>
#include <cmath>

namespace gridshield {

void FeasibleSetConfig::validate() const {
    if (tau_p <= 0 || tau_q <= 0) throw ValidationError("residual thresholds must be > 0");
    if (eps_bnd_rel <= 0 || eps_bnd_abs <= 0 || cons_rel <= 0 || cons_abs <= 0)
        throw ValidationError("feasible-set tolerances must be > 0");
    if (v_min >= v_max) throw ValidationError("V bounds: v_min must be < v_max");
    if (theta_min >= theta_max) throw ValidationError("theta bounds: min must be < max");
}

void FamilyConfig::validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!in_unit(simple.kappa_p) || !in_unit(simple.kappa_q))
        throw ValidationError("kappa out of (0,1]");
    if (simple.delta_p <= 0 || simple.delta_q <= 0) throw ValidationError("delta must be > 0");
    if (!in_unit(lra.gen_cap) || !in_unit(lra.load_cap)) throw ValidationError("LRA caps out of (0,1]");
    if (lra.lambda < 0) throw ValidationError("LRA lambda must be >= 0");
    if (line.max_lines < 1) throw ValidationError("max_lines must be >= 1");
    if (corruption.beta < 0 || corruption.eps_r <= 0)
        throw ValidationError("corruption tolerances invalid");
}

std::string family_name(AttackFamily f) {
    switch (f) {
        case AttackFamily::simple: return "simple";
        case AttackFamily::lra: return "lra";
        case AttackFamily::line: return "line";
        case AttackFamily::corruption: return "corruption";
    }
    return "?";
}

AttackFamily family_from_name(const std::string& name) {
    if (name == "simple") return AttackFamily::simple;
    if (name == "lra") return AttackFamily::lra;
    if (name == "line") return AttackFamily::line;
    if (name == "corruption") return AttackFamily::corruption;
    throw ValidationError("unknown attack family '" + name + "'");
}

std::string status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::success: return "success";
        case SolveStatus::degenerate: return "degenerate";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::skipped: return "skipped";
    }
    return "?";
}

std::vector<std::pair<int, int>> select_overload_targets(const NetworkModel& model,
                                                         const Admittance& y, const GridGraph& graph,
                                                         const AttackZone& zone, int max_lines) {
    struct Candidate {
        int i, j;
        double babs;
    };
    std::vector<Candidate> candidates;
    for (int i = 0; i < model.n_bus(); ++i) {
        const bool i_in = zone.contains(i);
        for (int j : graph.adj[i]) {
            if (j <= i) continue;  // one entry per unordered pair
            const bool j_in = zone.contains(j);
            if (!i_in && !j_in) continue;  // exterior-exterior
            candidates.push_back({i, j, std::abs(y.b_at(i, j))});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.babs != b.babs) return a.babs > b.babs;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });

    // greedy by |B|, requiring the picked set to stay connected as lines
    std::vector<std::pair<int, int>> picked;
    std::vector<int> touched;
    for (const auto& c : candidates) {
        if (static_cast<int>(picked.size()) == max_lines) break;
        if (!picked.empty()) {
            const bool shares = std::find(touched.begin(), touched.end(), c.i) != touched.end() ||
                                std::find(touched.begin(), touched.end(), c.j) != touched.end();
            if (!shares) continue;
        }
        picked.push_back({c.i, c.j});
        touched.push_back(c.i);
        touched.push_back(c.j);
    }
    return picked;
}

LraBuses lra_buses(const NetworkModel& model, const AttackZone& zone) {
    LraBuses out;
    for (int b : zone.buses) {
        if (std::binary_search(zone.zero_injection.begin(), zone.zero_injection.end(), b)) continue;
        if (model.has_inservice_gen(b))
            out.gen.push_back(b);
        else
            out.load.push_back(b);
    }
    return out;
}

double lra_cost_up(const LraConfig& cfg, const NetworkModel& model, int bus) {
    if (!cfg.cost_up.empty()) return cfg.cost_up.at(bus);
    return static_cast<double>(model.buses[bus].id) / model.n_bus();
}

double lra_cost_down(const LraConfig& cfg, const NetworkModel& model, int bus) {
    if (!cfg.cost_down.empty()) return cfg.cost_down.at(bus);
    return static_cast<double>(model.buses[bus].id) / model.n_bus();
}

double lra_gen_cap_abs(const LraConfig& cfg, double p0) {
    return p0 == 0.0 ? cfg.gen_fallback : cfg.gen_cap * std::abs(p0);
}

double lra_load_cap_abs(const LraConfig& cfg, double p0) {
    return p0 == 0.0 ? cfg.load_fallback : cfg.load_cap * std::abs(p0);
}

double attack_objective_value(const AttackProblem& prob, const Snapshot& attacked) {
    const Snapshot& base = *prob.baseline;
    const AttackZone& zone = *prob.zone;
    switch (prob.family.family) {
        case AttackFamily::simple:
        case AttackFamily::corruption: {
            double f = 0.0;
            for (int b : zone.buses) {
                const double dv = attacked.v[b] - base.v[b];
                const double dth = attacked.theta[b] - base.theta[b];
                f += dv * dv + dth * dth;
            }
            return f;
        }
        case AttackFamily::line: {
            const auto targets = select_overload_targets(*prob.model, *prob.y, *prob.graph, zone,
                                                         prob.family.line.max_lines);
            double f = 0.0;
            for (const auto& [i, j] : targets) {
                const double bij = prob.y->b_at(i, j);
                const double pline = -bij * (attacked.theta[i] - attacked.theta[j]);
                const double qline = std::abs(bij) * (attacked.v[i] - attacked.v[j]);
                f += pline * pline + qline * qline;
            }
            return f;
        }
        case AttackFamily::lra: {
            const LraBuses gl = lra_buses(*prob.model, zone);
            double f = 0.0;
            for (int b : gl.gen) {
                const double d = attacked.p[b] - base.p[b];
                // split d into its positive/negative parts
                f += lra_cost_up(prob.family.lra, *prob.model, b) * std::max(0.0, d) -
                     lra_cost_down(prob.family.lra, *prob.model, b) * std::max(0.0, -d);
            }
            for (int b : gl.load) f += prob.family.lra.lambda * std::abs(attacked.p[b] - base.p[b]);
            return f;
        }
    }
    return 0.0;
}

}  // namespace gridshield
