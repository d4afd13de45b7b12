#include "gridshield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "gridshield/rng.hpp"

namespace gridshield {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Per-sample MAE channels for a dataset under a model.
void per_sample_maes(const MlpParams& params, const SnapshotSet& set, std::vector<double>& mae_v,
                     std::vector<double>& mae_th) {
    const int n = set.n_bus;
    const int rows = static_cast<int>(set.rows.size());
    mae_v.resize(rows);
    mae_th.resize(rows);
    constexpr int kChunk = 256;
    for (int start = 0; start < rows; start += kChunk) {
        const int len = std::min(kChunk, rows - start);
        Mat x(len, 2 * n);
        for (int r = 0; r < len; ++r) {
            x.row(r).head(n) = set.rows[start + r].p.transpose();
            x.row(r).tail(n) = set.rows[start + r].q.transpose();
        }
        const Mat out = forward_batch(params, x);
        for (int r = 0; r < len; ++r) {
            const Snapshot& snap = set.rows[start + r];
            double ev = 0, eth = 0;
            for (int i = 0; i < n; ++i) {
                ev += std::abs(out(r, 2 * n + i) - snap.v[i]);
                eth += std::abs(out(r, 3 * n + i) - snap.theta[i]);
            }
            mae_v[start + r] = ev / n;
            mae_th[start + r] = eth / n;
        }
    }
}

}  // namespace

double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * (static_cast<double>(values.size()) - 1.0);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = static_cast<size_t>(std::ceil(pos));
    if (lo == hi) return values[lo];
    const double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
}

MetricReport mae(const MlpParams& params, const SnapshotSet& set, const std::string& dataset_name) {
    if (set.rows.empty()) throw ValidationError("mae on empty dataset");
    if (params.in_dim() != 2 * set.n_bus)
        throw ValidationError("model input dim does not match dataset");
    std::vector<double> mv, mth;
    per_sample_maes(params, set, mv, mth);

    MetricReport rep;
    rep.dataset = dataset_name;
    rep.n_samples = static_cast<int>(set.rows.size());
    rep.family = set.rows.front().family;
    rep.zone_id = set.rows.front().zone_id;
    rep.mae_v = std::accumulate(mv.begin(), mv.end(), 0.0) / mv.size();
    rep.mae_theta = std::accumulate(mth.begin(), mth.end(), 0.0) / mth.size();
    rep.mae_overall = 0.5 * (rep.mae_v + rep.mae_theta);
    rep.mae95_v = percentile_linear(mv, 95.0);
    rep.mae99_v = percentile_linear(mv, 99.0);
    rep.mae95_theta = percentile_linear(mth, 95.0);
    rep.mae99_theta = percentile_linear(mth, 99.0);
    return rep;
}

std::vector<SweepRow> scaled_perturbation_eval(const MlpParams& params, const SnapshotSet& clean,
                                               const std::vector<double>& levels,
                                               const std::vector<int>& bus_counts, uint64_t seed) {
    if (clean.rows.empty()) throw ValidationError("perturbation sweep on empty dataset");
    const int n = clean.n_bus;
    for (int k : bus_counts)
        if (k > n) throw ValidationError("perturbed bus count exceeds bus count");

    std::vector<SweepRow> rows;
    for (double level : levels) {
        for (int k : bus_counts) {
            SnapshotSet perturbed;
            perturbed.n_bus = n;
            perturbed.rows = clean.rows;
            for (size_t s = 0; s < perturbed.rows.size(); ++s) {
                auto eng = make_engine(seed, s, static_cast<uint64_t>(level * 1e6),
                                       static_cast<uint64_t>(k));
                Snapshot& snap = perturbed.rows[s];
                snap.kind = "perturbed";
                // sample k distinct buses
                std::vector<int> all(n);
                std::iota(all.begin(), all.end(), 0);
                for (int pick = 0; pick < k; ++pick) {
                    const int j = pick + static_cast<int>(uniform01(eng) * (n - pick));
                    std::swap(all[pick], all[std::min(j, n - 1)]);
                    const int bus = all[pick];
                    snap.p[bus] *= 1.0 + level;
                    snap.q[bus] *= 1.0 + level;
                }
            }
            const MetricReport rep = mae(params, perturbed, "perturbed");
            rows.push_back({level, k, rep.mae_v, rep.mae_theta, rep.mae_overall});
        }
    }
    return rows;
}

nlohmann::json reports_to_json(const std::vector<MetricReport>& reports, uint64_t config_hash) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config_hash"] = config_hash;
    j["datasets"] = nlohmann::json::array();
    for (const auto& r : reports) {
        j["datasets"].push_back({{"dataset", r.dataset},
                                 {"family", r.family},
                                 {"zone_id", r.zone_id},
                                 {"n_samples", r.n_samples},
                                 {"mae_v", r.mae_v},
                                 {"mae_theta", r.mae_theta},
                                 {"mae_overall", r.mae_overall},
                                 {"mae95_v", r.mae95_v},
                                 {"mae99_v", r.mae99_v},
                                 {"mae95_theta", r.mae95_theta},
                                 {"mae99_theta", r.mae99_theta}});
    }
    // equal-weight aggregates over the attacked datasets
    std::map<std::string, std::vector<const MetricReport*>> by_family;
    std::map<int, std::vector<const MetricReport*>> by_zone;
    for (const auto& r : reports) {
        if (r.family.empty()) continue;
        by_family[r.family].push_back(&r);
        if (r.zone_id >= 0) by_zone[r.zone_id].push_back(&r);
    }
    auto aggregate = [](const std::vector<const MetricReport*>& group) {
        nlohmann::json a;
        double v = 0, th = 0, overall = 0;
        for (const auto* r : group) {
            v += r->mae_v;
            th += r->mae_theta;
            overall += r->mae_overall;
        }
        const double m = static_cast<double>(group.size());
        a["mae_v"] = v / m;
        a["mae_theta"] = th / m;
        a["mae_overall"] = overall / m;
        a["n_datasets"] = group.size();
        return a;
    };
    j["family_aggregates"] = nlohmann::json::object();
    for (const auto& [family, group] : by_family) j["family_aggregates"][family] = aggregate(group);
    j["zone_aggregates"] = nlohmann::json::object();
    for (const auto& [zone, group] : by_zone)
        j["zone_aggregates"][std::to_string(zone)] = aggregate(group);
    return j;
}

std::vector<MetricReport> reports_from_json(const nlohmann::json& j) {
    std::vector<MetricReport> out;
    for (const auto& d : j.at("datasets")) {
        MetricReport r;
        r.dataset = d.at("dataset").get<std::string>();
        r.family = d.at("family").get<std::string>();
        r.zone_id = d.at("zone_id").get<int>();
        r.n_samples = d.at("n_samples").get<int>();
        r.mae_v = d.at("mae_v").get<double>();
        r.mae_theta = d.at("mae_theta").get<double>();
        r.mae_overall = d.at("mae_overall").get<double>();
        r.mae95_v = d.at("mae95_v").get<double>();
        r.mae99_v = d.at("mae99_v").get<double>();
        r.mae95_theta = d.at("mae95_theta").get<double>();
        r.mae99_theta = d.at("mae99_theta").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

void emit_report(const std::vector<MetricReport>& reports, uint64_t config_hash,
                 const std::string& json_path, const std::string& csv_path) {
    {
        std::ofstream out(json_path);
        if (!out) throw ValidationError("cannot write " + json_path);
        out << reports_to_json(reports, config_hash).dump(2) << "\n";
    }
    std::ofstream csv(csv_path);
    if (!csv) throw ValidationError("cannot write " + csv_path);
    csv << "dataset,family,zone_id,n_samples,mae_v,mae_theta,mae_overall,"
           "mae95_v,mae99_v,mae95_theta,mae99_theta\n";
    for (const auto& r : reports) {
        csv << r.dataset << "," << r.family << "," << r.zone_id << "," << r.n_samples << ","
            << fmt_double(r.mae_v) << "," << fmt_double(r.mae_theta) << ","
            << fmt_double(r.mae_overall) << "," << fmt_double(r.mae95_v) << ","
            << fmt_double(r.mae99_v) << "," << fmt_double(r.mae95_theta) << ","
            << fmt_double(r.mae99_theta) << "\n";
    }
}

nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows, uint64_t config_hash) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config_hash"] = config_hash;
    j["sign_convention"] = "multiplicative (1+level) inflation of measured P,Q";
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"level", r.level},
                             {"buses", r.k},
                             {"mae_v", r.mae_v},
                             {"mae_theta", r.mae_theta},
                             {"mae_overall", r.mae_overall}});
    return j;
}

}  // namespace gridshield
