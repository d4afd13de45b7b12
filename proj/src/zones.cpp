#include "gridshield/zones.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "gridshield/log.hpp"

namespace gridshield {

namespace {
constexpr double kZeroInjectionTol = 1e-6;
}

bool AttackZone::contains(int bus) const {
    return std::binary_search(buses.begin(), buses.end(), bus);
}

void partition_zone(AttackZone& zone, const GridGraph& graph, const Snapshot& reference) {
    std::sort(zone.buses.begin(), zone.buses.end());
    zone.interior.clear();
    zone.boundary.clear();
    zone.zero_injection.clear();
    for (int b : zone.buses) {
        bool touches_exterior = false;
        for (int nbr : graph.adj[b])
            if (!zone.contains(nbr)) {
                touches_exterior = true;
                break;
            }
        (touches_exterior ? zone.boundary : zone.interior).push_back(b);
        if (std::abs(reference.p[b]) < kZeroInjectionTol &&
            std::abs(reference.q[b]) < kZeroInjectionTol)
            zone.zero_injection.push_back(b);
    }
}

std::vector<AttackZone> enumerate_zones(const GridGraph& graph, int seed_bus,
                                        const ZoneLimits& limits, const Snapshot& reference) {
    if (seed_bus < 0 || seed_bus >= graph.n()) throw ValidationError("enumerate_zones: bad seed bus");
    std::vector<int> hop(graph.n(), -1);
    hop[seed_bus] = 0;
    std::queue<int> q;
    q.push(seed_bus);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (hop[u] == limits.h_max) continue;
        for (int w : graph.adj[u])
            if (hop[w] < 0) {
                hop[w] = hop[u] + 1;
                q.push(w);
            }
    }
    // (hop, bus id) order drives the n_max truncation
    std::vector<int> reached;
    for (int b = 0; b < graph.n(); ++b)
        if (hop[b] >= 0) reached.push_back(b);
    std::sort(reached.begin(), reached.end(),
              [&](int a, int b) { return std::tie(hop[a], a) < std::tie(hop[b], b); });

    std::vector<AttackZone> candidates;
    for (int h = 1; h <= limits.h_max; ++h) {
        AttackZone zone;
        zone.seed_bus = seed_bus;
        zone.hop_limit = h;
        for (int b : reached) {
            if (hop[b] > h) break;
            zone.buses.push_back(b);
            if (static_cast<int>(zone.buses.size()) == limits.n_max) break;
        }
        if (static_cast<int>(zone.buses.size()) < limits.n_min) continue;
        if (!candidates.empty() && candidates.back().buses == zone.buses) continue;
        partition_zone(zone, graph, reference);
        zone.connected = graph.connected_subset(zone.buses);  // true by construction of BFS balls
        zone.id = static_cast<int>(candidates.size()) + 1;
        candidates.push_back(std::move(zone));
    }
    return candidates;
}

AttackZone zone_from_buses(const NetworkModel& model, const GridGraph& graph,
                           const std::vector<int>& external_ids, const ZoneLimits& limits,
                           const Snapshot& reference, int id) {
    if (external_ids.empty()) throw ValidationError("zone bus list is empty");
    AttackZone zone;
    zone.id = id;
    for (int ext : external_ids) zone.buses.push_back(model.index_of(ext));
    std::sort(zone.buses.begin(), zone.buses.end());
    if (std::adjacent_find(zone.buses.begin(), zone.buses.end()) != zone.buses.end())
        throw ValidationError("zone bus list has duplicates");
    const int size = static_cast<int>(zone.buses.size());
    if (size < limits.n_min || size > limits.n_max)
        throw ValidationError("zone size " + std::to_string(size) + " outside [" +
                              std::to_string(limits.n_min) + "," + std::to_string(limits.n_max) + "]");
    partition_zone(zone, graph, reference);
    zone.connected = graph.connected_subset(zone.buses);
    if (!zone.connected)
        log_event("zone_disconnected",
                  {{"zone", id},
                   {"note", "explicit bus list induces a disconnected subgraph; accepted as-is"}});
    return zone;
}

}  // namespace gridshield
