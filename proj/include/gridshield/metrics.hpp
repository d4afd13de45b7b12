#pragma once

#include "gridshield/train.hpp"
#include "json.hpp"

namespace gridshield {

struct MetricReport {
    std::string dataset;
    std::string family;  // empty for clean datasets
    int zone_id = -1;
    int n_samples = 0;
    double mae_v = 0, mae_theta = 0, mae_overall = 0;
    double mae95_v = 0, mae99_v = 0;
    double mae95_theta = 0, mae99_theta = 0;
};

// Percentile with linear interpolation between order statistics
// (index = p/100 * (n-1)).
double percentile_linear(std::vector<double> values, double p);

// Per-sample mean absolute error over buses for V and theta against labels;
// dataset means, overall = mean of the two channels, percentiles over the
// per-sample MAEs.
MetricReport mae(const MlpParams& params, const SnapshotSet& set, const std::string& dataset_name);

struct SweepRow {
    double level = 0;  // fractional perturbation, e.g. 0.05
    int k = 0;         // attacked bus count
    double mae_v = 0, mae_theta = 0, mae_overall = 0;
};

// Scaled data-manipulation sweep: per snapshot pick k random buses and
// multiply their measured P and Q by (1+level); MAE against clean labels.
std::vector<SweepRow> scaled_perturbation_eval(const MlpParams& params, const SnapshotSet& clean,
                                               const std::vector<double>& levels,
                                               const std::vector<int>& bus_counts, uint64_t seed);

// Report bundle: JSON (full, with per-family and per-zone equal-weight
// aggregates) and flat CSV. Schema versioned; embeds the config hash.
nlohmann::json reports_to_json(const std::vector<MetricReport>& reports, uint64_t config_hash);
std::vector<MetricReport> reports_from_json(const nlohmann::json& j);
void emit_report(const std::vector<MetricReport>& reports, uint64_t config_hash,
                 const std::string& json_path, const std::string& csv_path);

nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows, uint64_t config_hash);

}  // namespace gridshield
