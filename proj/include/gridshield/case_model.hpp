#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gridshield/errors.hpp"

namespace gridshield {

enum class BusType { PQ, PV, Slack };

// All power quantities are per-unit on base_mva, all angles are radians.
// Degrees appear only at file boundaries (case text, report output).
struct BusRecord {
    int id = 0;  // external (case file) bus number
    BusType type = BusType::PQ;
    double pd = 0.0, qd = 0.0;  // base load, p.u.
    double gs = 0.0, bs = 0.0;  // shunt admittance, p.u.
    double vm = 1.0, va = 0.0;  // case-file operating point (va in rad)
    double base_kv = 0.0;
    double vmax = 1.06, vmin = 0.94;
};

struct BranchRecord {
    int from = 0, to = 0;            // internal bus indices
    int from_id = 0, to_id = 0;      // external bus numbers
    double r = 0.0, x = 0.0, b = 0.0;
    double tap = 0.0;                // 0 means no transformer (ratio 1)
    double shift = 0.0;              // rad
    bool in_service = true;
};

struct GenRecord {
    int bus = 0;     // internal index
    int bus_id = 0;  // external number
    double pg = 0.0, qg = 0.0;
    double qmax = 0.0, qmin = 0.0;
    double vg = 1.0;
    bool in_service = true;
};

struct NetworkModel {
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<BranchRecord> branches;
    std::vector<GenRecord> gens;
    std::unordered_map<int, int> bus_index;  // external id -> internal index

    int n_bus() const { return static_cast<int>(buses.size()); }
    int slack() const;                    // internal index of the slack bus
    int index_of(int external_id) const;  // throws ValidationError on unknown id
    bool has_inservice_gen(int bus_idx) const;
};

// Parses MATPOWER-format case text (mpc.baseMVA / mpc.bus / mpc.gen /
// mpc.branch matrices). Quantities are converted to per-unit and radians here.
// Throws ParseError naming the offending line on malformed input and
// ValidationError when the parsed network violates a model invariant
// (no/multiple slack, unknown branch endpoint, disconnected bus, ...).
NetworkModel parse_case(const std::string& text);

NetworkModel parse_case_file(const std::string& path);

// JSON dump of the parsed model (debug aid for `parse-case --dump`).
std::string model_to_json(const NetworkModel& model);

}  // namespace gridshield
