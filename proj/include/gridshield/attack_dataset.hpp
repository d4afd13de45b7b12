#pragma once

#include "gridshield/attack_solver.hpp"

namespace gridshield {

struct AttackRunStats {
    int attempted = 0, emitted = 0, degenerate = 0, infeasible = 0, skipped = 0;
    std::map<std::string, int> worst_group_counts;  // per-constraint histogram of failures
};

struct AttackDataset {
    SnapshotSet set;
    AttackFamily family = AttackFamily::simple;
    int zone_id = 0;
    AttackRunStats stats;
    std::string name() const { return "attack_" + family_name(family) + "_zone" + std::to_string(zone_id); }
};

// Solves one attack instance per clean snapshot for every (zone, family)
// pair; emits only verified-feasible improvements (status success). Parallel
// across snapshots, reduced in input order, deterministic per seed. Warns
// with a per-constraint violation histogram when the feasible yield drops
// below 50%.
std::vector<AttackDataset> generate_attack_datasets(
    const NetworkModel& model, const Admittance& y, const GridGraph& graph,
    const SnapshotSet& clean, const std::vector<AttackZone>& zones,
    const std::vector<FamilyConfig>& families, const FeasibleSetConfig& feasible, uint64_t seed,
    int limit_snapshots = -1, int threads = 0);

}  // namespace gridshield
