#pragma once

#include "gridshield/attack_dataset.hpp"
#include "gridshield/metrics.hpp"

namespace gridshield {

struct ZoneSpec {
    int id = 0;
    std::vector<int> buses;  // explicit external ids; empty -> BFS from seed_bus
    int seed_bus = -1;
};

struct PipelineConfig {
    std::string case_path;
    uint64_t seed = 1;
    std::string out_dir;
    SnapshotSetConfig snapshots;
    std::vector<ZoneSpec> zones;
    ZoneLimits zone_limits;
    std::vector<AttackFamily> family_list{AttackFamily::simple, AttackFamily::lra,
                                          AttackFamily::line, AttackFamily::corruption};
    FamilyConfig family_defaults;  // per-family constants shared across the list
    FeasibleSetConfig feasible;    // tau_p/tau_q filled from residual scales at run time
    double tau_floor = 0.01;
    int attack_snapshots = 500;
    TrainConfig train;
    double val_fraction = 0.1;
    int fixed_search_trials = 8;
    int fixed_search_epochs = 6;
    std::vector<double> perturb_levels{0.05, 0.10, 0.20, 0.30};
    std::vector<int> perturb_bus_counts{1, 10};
};

// Default configuration mirroring the experimental defaults (IEEE 118 case,
// 14,822 snapshots, three zones, four families, 100 epochs).
nlohmann::json default_config_json();

// Parses and range-checks a pipeline config; unknown keys are rejected.
// Throws ConfigError listing every violation.
PipelineConfig parse_config(const nlohmann::json& j);

// FNV-1a over the canonical dump; embedded in every emitted artifact.
uint64_t config_hash(const nlohmann::json& j);

struct LoadedCase {
    NetworkModel model;
    Admittance y;
    GridGraph graph;
};
LoadedCase load_case(const std::string& path);

std::vector<AttackZone> build_zones(const PipelineConfig& cfg, const LoadedCase& grid,
                                    const Snapshot& reference);

std::vector<FamilyConfig> build_family_configs(const PipelineConfig& cfg);

// Seeded random search over per-component log-sigmas in [-5,5] for the fixed
// regime; architecture and optimizer settings stay as in base_cfg. Scored by
// validation total loss under a reduced epoch budget.
std::array<double, 4> search_fixed_sigmas(const SnapshotSet& train_set, const SnapshotSet& val_set,
                                          const Admittance& y, TrainConfig base_cfg, int trials,
                                          int trial_epochs, uint64_t seed);

// End-to-end ablation: generate data, generate attacks, train
// dynamic -> fixed (searched static log-sigmas) -> frozen (dynamic's final s),
// evaluate everything, emit the comparative bundle under cfg.out_dir.
// Stage failures raise StageError; partial outputs are kept.
void run_ablation(const PipelineConfig& cfg, const nlohmann::json& raw_config);

}  // namespace gridshield
