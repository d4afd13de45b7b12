#pragma once

#include "gridshield/snapshot.hpp"

namespace gridshield {

// Connected attack region. All bus fields hold internal model indices,
// sorted ascending. boundary = zone buses adjacent to an exterior bus,
// interior = the rest; zero_injection per |P0|,|Q0| < 1e-6 on the reference
// clean snapshot.
struct AttackZone {
    int id = 0;
    std::vector<int> buses;
    std::vector<int> interior;
    std::vector<int> boundary;
    std::vector<int> zero_injection;
    int seed_bus = -1;
    int hop_limit = 0;
    bool connected = true;

    bool contains(int bus) const;
};

struct ZoneLimits {
    int h_max = 2;
    int n_min = 3;
    int n_max = 10;
};

// BFS candidates from a seed bus: one candidate per hop count 1..h_max,
// truncated to n_max in (hop, ascending bus id) order, rejected below n_min,
// deduplicated. An isolated seed yields no candidates.
std::vector<AttackZone> enumerate_zones(const GridGraph& graph, int seed_bus,
                                        const ZoneLimits& limits, const Snapshot& reference);

// Zone from an explicit bus-id list (external ids). Disconnected lists are
// accepted with connected=false and a logged warning; size bounds are
// enforced.
AttackZone zone_from_buses(const NetworkModel& model, const GridGraph& graph,
                           const std::vector<int>& external_ids, const ZoneLimits& limits,
                           const Snapshot& reference, int id);

// Recomputes interior/boundary/zero-injection for given zone buses.
void partition_zone(AttackZone& zone, const GridGraph& graph, const Snapshot& reference);

}  // namespace gridshield
