#pragma once

#include <optional>
#include <string>

#include "gridshield/gradients.hpp"

namespace gridshield {

struct TrainConfig {
    int n_layers = 2;   // hidden layers
    int width = 128;
    int batch = 64;
    double lr = 1e-3;
    double lambda_r = 0.1;
    int epochs = 100;
    double eps_norm = 1e-8;
    double eps_ratio = 1e-12;
    uint64_t rng_seed = 1;
    std::array<double, 4> fixed_s{0.0, 0.0, 0.0, 0.0};  // used when regime == fixed
    double s_min = -4.0, s_max = 2.0;

    void validate() const;  // sanity bounds only; search-space ranges live in RandomSearchSpace
};

struct TraceRow {
    double total = 0, lp = 0, lq = 0, lv = 0, ltheta = 0;
    double w[4] = {0, 0, 0, 0};
    double w_phys = 0, w_data = 0, ratio = 0;
};

struct TrainTrace {
    std::vector<TraceRow> rows;  // one per epoch
};

void write_trace_csv(const TrainTrace& trace, const std::string& path);

struct TrainResult {
    MlpParams params;
    UncertaintyState u;
    TrainTrace trace;
    double final_train_loss = 0.0;  // last epoch mean total
    double val_loss = 0.0;          // total objective on the validation set
};

// Minibatch Adam over the network parameters and (dynamic regime) the
// log-uncertainties; seeded reshuffle each epoch. frozen_s supplies the
// uncertainties for the frozen regime (typically a prior dynamic run's final
// values). Aborts with epoch/batch context on a NaN loss.
TrainResult train(const SnapshotSet& train_set, const SnapshotSet& val_set, const Admittance& y,
                  const TrainConfig& cfg, Regime regime,
                  const std::array<double, 4>* frozen_s = nullptr);

// Deterministic 90/10-style split by seeded shuffle.
std::pair<SnapshotSet, SnapshotSet> split_dataset(const SnapshotSet& set, double val_fraction,
                                                  uint64_t seed);

struct RandomSearchSpace {
    std::vector<int> layer_choices{2, 4, 6};
    int width_lo = 64, width_hi = 4096;
    int batch_lo = 32, batch_hi = 128;
    double lr_lo = 1e-5, lr_hi = 1e-3;          // log-uniform
    double lambda_r_lo = 1e-4, lambda_r_hi = 10;  // log-uniform
    double fixed_s_lo = -5, fixed_s_hi = 5;       // uniform, fixed regime only
    int trial_epochs = 10;
};

struct SearchOutcome {
    TrainConfig best;
    double best_val_loss = 0.0;
    std::vector<double> trial_val_losses;  // NaN for diverged trials
};

// Seeded uniform random search (lr and lambda_r log-uniform) over the search
// space; each trial trains with the reduced epoch budget and is scored by
// validation total loss. Throws TrainError if every trial diverges.
SearchOutcome random_search(const SnapshotSet& train_set, const SnapshotSet& val_set,
                            const Admittance& y, const RandomSearchSpace& space, Regime regime,
                            int n_trials, uint64_t seed);

// Checkpoint: magic + length-prefixed JSON header (shapes, config, regime,
// s values) followed by the little-endian float64 weight blob.
void save_checkpoint(const std::string& path, const MlpParams& params, const UncertaintyState& u,
                     const TrainConfig& cfg, Regime regime);

struct Checkpoint {
    MlpParams params;
    UncertaintyState u;
    TrainConfig cfg;
    Regime regime = Regime::dynamic;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gridshield
