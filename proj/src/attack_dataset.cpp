#include "gridshield/attack_dataset.hpp"

#include <algorithm>

#include "gridshield/log.hpp"
#include "gridshield/parallel.hpp"
#include "gridshield/rng.hpp"

namespace gridshield {

std::vector<AttackDataset> generate_attack_datasets(
    const NetworkModel& model, const Admittance& y, const GridGraph& graph,
    const SnapshotSet& clean, const std::vector<AttackZone>& zones,
    const std::vector<FamilyConfig>& families, const FeasibleSetConfig& feasible, uint64_t seed,
    int limit_snapshots, int threads) {
    const int n_snapshots = limit_snapshots < 0
                                ? static_cast<int>(clean.rows.size())
                                : std::min<int>(limit_snapshots, clean.rows.size());
    std::vector<AttackDataset> out;
    for (const AttackZone& zone : zones) {
        for (const FamilyConfig& family : families) {
            AttackDataset ds;
            ds.family = family.family;
            ds.zone_id = zone.id;
            ds.set.n_bus = clean.n_bus;
            ds.stats.attempted = n_snapshots;

            std::vector<AttackResult> results(n_snapshots);
            parallel_for(n_snapshots, [&](int i) {
                AttackProblem prob;
                prob.model = &model;
                prob.y = &y;
                prob.graph = &graph;
                prob.baseline = &clean.rows[i];
                prob.zone = &zone;
                prob.feasible = feasible;
                prob.family = family;
                prob.rng_seed = derive_seed(seed, static_cast<uint64_t>(i), zone.id,
                                            static_cast<uint64_t>(family.family));
                results[i] = solve_attack(prob);
            }, threads);

            for (int i = 0; i < n_snapshots; ++i) {
                AttackResult& res = results[i];
                switch (res.status) {
                    case SolveStatus::success:
                        if (res.report.pass) {
                            res.attacked.seed = clean.rows[i].seed;
                            ds.set.rows.push_back(std::move(res.attacked));
                            ++ds.stats.emitted;
                        } else {
                            ++ds.stats.infeasible;
                            ++ds.stats.worst_group_counts[res.report.worst_group];
                        }
                        break;
                    case SolveStatus::degenerate:
                        ++ds.stats.degenerate;
                        break;
                    case SolveStatus::infeasible:
                        ++ds.stats.infeasible;
                        if (!res.report.worst_group.empty())
                            ++ds.stats.worst_group_counts[res.report.worst_group];
                        break;
                    case SolveStatus::skipped:
                        ++ds.stats.skipped;
                        break;
                }
            }

            if (ds.stats.skipped == n_snapshots && n_snapshots > 0) {
                log_event("attack_family_skipped",
                          {{"zone", zone.id}, {"family", family_name(family.family)}});
            } else if (n_snapshots > 0 && 2 * ds.stats.emitted < n_snapshots) {
                nlohmann::json hist;
                for (const auto& [group, count] : ds.stats.worst_group_counts) hist[group] = count;
                log_event("attack_low_yield", {{"zone", zone.id},
                                               {"family", family_name(family.family)},
                                               {"emitted", ds.stats.emitted},
                                               {"attempted", n_snapshots},
                                               {"violation_histogram", hist}});
            }
            log_event("attack_dataset", {{"zone", zone.id},
                                         {"family", family_name(family.family)},
                                         {"emitted", ds.stats.emitted},
                                         {"degenerate", ds.stats.degenerate},
                                         {"infeasible", ds.stats.infeasible},
                                         {"skipped", ds.stats.skipped}});
            out.push_back(std::move(ds));
        }
    }
    return out;
}

}  // namespace gridshield
