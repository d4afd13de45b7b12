#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gridshield/log.hpp"
#include "gridshield/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gridshield;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

nlohmann::json load_config(const std::string& path) {
    nlohmann::json j = default_config_json();
    if (!path.empty()) {
        const nlohmann::json user = read_json_file(path);
        j.merge_patch(user);
    }
    return j;
}

struct DataDir {
    SnapshotSet clean;
    ResidualScales scales;
    std::string case_path;
};

DataDir read_data_dir(const std::string& data) {
    DataDir d;
    const fs::path base(data);
    const fs::path csv = fs::is_directory(base) ? base / "clean.csv" : base;
    d.clean = read_snapshot_csv(csv.string());
    const fs::path meta = (fs::is_directory(base) ? base : base.parent_path()) / "meta.json";
    if (fs::exists(meta)) {
        const nlohmann::json m = read_json_file(meta.string());
        d.case_path = m.at("case").get<std::string>();
        d.scales.tau_bar_p = m.at("residual_scales").at("tau_bar_p").get<double>();
        d.scales.tau_bar_q = m.at("residual_scales").at("tau_bar_q").get<double>();
        d.scales.tau_p = m.at("residual_scales").at("tau_p").get<double>();
        d.scales.tau_q = m.at("residual_scales").at("tau_q").get<double>();
    }
    return d;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridshield: AC power-flow snapshots, uncertainty-weighted PINN state "
                 "estimation, and stealth-constrained FDIA benchmarks"};
    app.require_subcommand(1);

    // parse-case
    auto* cmd_parse = app.add_subcommand("parse-case", "parse a MATPOWER case and validate it");
    std::string case_path, config_path, out_path = "-", data_path, zones_path, model_path;
    bool dump = false;
    cmd_parse->add_option("--case", case_path, "case file")->required();
    cmd_parse->add_flag("--dump", dump, "dump the parsed model as JSON");

    // gen-data
    auto* cmd_gen = app.add_subcommand("gen-data", "generate clean steady-state snapshots");
    cmd_gen->add_option("--case", case_path, "case file")->required();
    cmd_gen->add_option("--config", config_path, "pipeline config JSON");
    cmd_gen->add_option("--out", out_path, "output directory")->required();

    // gen-attacks
    auto* cmd_attacks = app.add_subcommand("gen-attacks", "generate stealth-constrained FDIA datasets");
    std::string families_csv = "simple,lra,line,corruption";
    int limit_snapshots = -1;
    cmd_attacks->add_option("--data", data_path, "clean dataset directory")->required();
    cmd_attacks->add_option("--zones", zones_path, "zone spec JSON");
    cmd_attacks->add_option("--families", families_csv, "comma list of families");
    cmd_attacks->add_option("--config", config_path, "pipeline config JSON");
    cmd_attacks->add_option("--limit", limit_snapshots, "max clean snapshots to attack");
    cmd_attacks->add_option("--out", out_path, "output directory")->required();

    // train
    auto* cmd_train = app.add_subcommand("train", "train the PINN state estimator");
    std::string regime_name_s = "dynamic", frozen_from;
    cmd_train->add_option("--data", data_path, "clean dataset directory")->required();
    cmd_train->add_option("--regime", regime_name_s, "dynamic|fixed|frozen");
    cmd_train->add_option("--config", config_path, "pipeline config JSON");
    cmd_train->add_option("--frozen-from", frozen_from, "dynamic checkpoint supplying s (frozen)");
    cmd_train->add_option("--out", out_path, "checkpoint path")->required();

    // search
    auto* cmd_search = app.add_subcommand("search", "random hyperparameter search");
    int trials = 10;
    cmd_search->add_option("--data", data_path, "clean dataset directory")->required();
    cmd_search->add_option("--trials", trials, "number of trials");
    cmd_search->add_option("--regime", regime_name_s, "dynamic|fixed");
    cmd_search->add_option("--config", config_path, "pipeline config JSON");
    cmd_search->add_option("--out", out_path, "best-config JSON path")->required();

    // evaluate
    auto* cmd_eval = app.add_subcommand("evaluate", "MAE metrics on dataset(s)");
    cmd_eval->add_option("--model", model_path, "checkpoint")->required();
    cmd_eval->add_option("--data", data_path, "dataset file or directory of attack CSVs")->required();
    cmd_eval->add_option("--out", out_path, "report JSON path")->required();

    // perturb-sweep
    auto* cmd_sweep = app.add_subcommand("perturb-sweep", "scaled data-manipulation sweep");
    std::string levels_csv = "5,10,20,30", buses_csv = "1,10";
    cmd_sweep->add_option("--model", model_path, "checkpoint")->required();
    cmd_sweep->add_option("--data", data_path, "clean dataset directory or CSV")->required();
    cmd_sweep->add_option("--levels", levels_csv, "perturbation levels, percent");
    cmd_sweep->add_option("--buses", buses_csv, "attacked bus counts");
    cmd_sweep->add_option("--out", out_path, "sweep JSON path")->required();

    // ablation
    auto* cmd_ablation = app.add_subcommand("ablation", "end-to-end dynamic/fixed/frozen study");
    cmd_ablation->add_option("--config", config_path, "pipeline config JSON");
    std::string out_override;
    cmd_ablation->add_option("--out", out_override, "override output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_parse) {
            const NetworkModel model = parse_case_file(case_path);
            if (dump)
                std::cout << model_to_json(model) << "\n";
            else
                std::cout << "parsed " << model.n_bus() << " buses, " << model.branches.size()
                          << " branches, " << model.gens.size() << " generators\n";
            return kExitOk;
        }

        const nlohmann::json raw = load_config(config_path);
        PipelineConfig cfg = parse_config(raw);
        const uint64_t hash = config_hash(raw);

        if (*cmd_gen) {
            const LoadedCase grid = load_case(case_path);
            SnapshotSetConfig scfg = cfg.snapshots;
            scfg.rng_seed = cfg.seed;
            const SnapshotSet clean = generate_snapshots(grid.model, grid.y, scfg);
            const ResidualScales scales = residual_scales(clean, grid.y, cfg.tau_floor);
            fs::create_directories(out_path);
            write_snapshot_csv(clean, (fs::path(out_path) / "clean.csv").string());
            nlohmann::json meta;
            meta["schema_version"] = 1;
            meta["config_hash"] = hash;
            meta["case"] = case_path;
            meta["n_rows"] = clean.rows.size();
            meta["n_bus"] = clean.n_bus;
            meta["residual_scales"] = {{"tau_bar_p", scales.tau_bar_p},
                                       {"tau_bar_q", scales.tau_bar_q},
                                       {"tau_p", scales.tau_p},
                                       {"tau_q", scales.tau_q}};
            std::ofstream mj(fs::path(out_path) / "meta.json");
            mj << meta.dump(2) << "\n";
            std::cout << "wrote " << clean.rows.size() << " snapshots to " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_attacks) {
            const DataDir data = read_data_dir(data_path);
            if (data.case_path.empty()) throw ConfigError("clean dataset meta.json missing case path");
            const LoadedCase grid = load_case(data.case_path);
            if (!zones_path.empty()) {
                const nlohmann::json zj = read_json_file(zones_path);
                nlohmann::json patched = raw;
                patched["zones"] = zj.is_array() ? zj : zj.at("zones");
                if (zj.is_object() && zj.contains("zone_limits"))
                    patched["zone_limits"] = zj.at("zone_limits");
                cfg = parse_config(patched);
            }
            cfg.family_list.clear();
            for (const auto& name : split_list(families_csv))
                cfg.family_list.push_back(family_from_name(name));
            FeasibleSetConfig feasible = cfg.feasible;
            feasible.tau_p = data.scales.tau_p;
            feasible.tau_q = data.scales.tau_q;
            const auto zones = build_zones(cfg, grid, data.clean.rows.front());
            const auto families = build_family_configs(cfg);
            const auto sets = generate_attack_datasets(grid.model, grid.y, grid.graph, data.clean,
                                                       zones, families, feasible, cfg.seed,
                                                       limit_snapshots);
            fs::create_directories(out_path);
            nlohmann::json meta;
            meta["schema_version"] = 1;
            meta["config_hash"] = hash;
            for (const auto& ds : sets) {
                write_snapshot_csv(ds.set, (fs::path(out_path) / (ds.name() + ".csv")).string());
                meta["datasets"].push_back({{"name", ds.name()},
                                            {"family", family_name(ds.family)},
                                            {"zone", ds.zone_id},
                                            {"attempted", ds.stats.attempted},
                                            {"emitted", ds.stats.emitted},
                                            {"degenerate", ds.stats.degenerate},
                                            {"infeasible", ds.stats.infeasible},
                                            {"skipped", ds.stats.skipped}});
            }
            std::ofstream mj(fs::path(out_path) / "meta.json");
            mj << meta.dump(2) << "\n";
            std::cout << "wrote " << sets.size() << " attack datasets to " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_train) {
            const DataDir data = read_data_dir(data_path);
            if (data.case_path.empty()) throw ConfigError("clean dataset meta.json missing case path");
            const LoadedCase grid = load_case(data.case_path);
            auto [train_set, val_set] = split_dataset(data.clean, cfg.val_fraction, cfg.seed);
            TrainConfig tc = cfg.train;
            tc.rng_seed = cfg.seed;
            const Regime regime = regime_from_name(regime_name_s);
            std::array<double, 4> frozen_s{};
            const std::array<double, 4>* frozen_ptr = nullptr;
            if (regime == Regime::frozen) {
                if (frozen_from.empty())
                    throw ConfigError("frozen regime requires --frozen-from <dynamic ckpt>");
                frozen_s = load_checkpoint(frozen_from).u.s;
                frozen_ptr = &frozen_s;
            }
            const TrainResult res = train(train_set, val_set, grid.y, tc, regime, frozen_ptr);
            save_checkpoint(out_path, res.params, res.u, tc, regime);
            write_trace_csv(res.trace, out_path + ".trace.csv");
            std::cout << "final train loss " << res.final_train_loss << ", val loss "
                      << res.val_loss << "; checkpoint " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_search) {
            const DataDir data = read_data_dir(data_path);
            if (data.case_path.empty()) throw ConfigError("clean dataset meta.json missing case path");
            const LoadedCase grid = load_case(data.case_path);
            auto [train_set, val_set] = split_dataset(data.clean, cfg.val_fraction, cfg.seed);
            RandomSearchSpace space;
            const SearchOutcome outcome = random_search(train_set, val_set, grid.y, space,
                                                        regime_from_name(regime_name_s), trials,
                                                        cfg.seed);
            nlohmann::json best;
            best["n_layers"] = outcome.best.n_layers;
            best["width"] = outcome.best.width;
            best["batch"] = outcome.best.batch;
            best["lr"] = outcome.best.lr;
            best["lambda_r"] = outcome.best.lambda_r;
            best["fixed_s"] = outcome.best.fixed_s;
            best["val_loss"] = outcome.best_val_loss;
            std::ofstream bj(out_path);
            bj << best.dump(2) << "\n";
            std::cout << "best val loss " << outcome.best_val_loss << "; wrote " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_eval) {
            const Checkpoint ck = load_checkpoint(model_path);
            std::vector<MetricReport> reports;
            if (fs::is_directory(data_path)) {
                std::vector<fs::path> files;
                for (const auto& entry : fs::directory_iterator(data_path))
                    if (entry.path().extension() == ".csv") files.push_back(entry.path());
                std::sort(files.begin(), files.end());
                for (const auto& f : files) {
                    const SnapshotSet set = read_snapshot_csv(f.string());
                    if (!set.rows.empty()) reports.push_back(mae(ck.params, set, f.stem().string()));
                }
            } else {
                const SnapshotSet set = read_snapshot_csv(data_path);
                reports.push_back(mae(ck.params, set, fs::path(data_path).stem().string()));
            }
            const std::string csv_out = out_path + ".csv";
            emit_report(reports, hash, out_path, csv_out);
            std::cout << "wrote " << reports.size() << " dataset reports to " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_sweep) {
            const Checkpoint ck = load_checkpoint(model_path);
            const DataDir data = read_data_dir(data_path);
            std::vector<double> levels;
            for (const auto& tok : split_list(levels_csv)) levels.push_back(std::stod(tok) / 100.0);
            std::vector<int> buses;
            for (const auto& tok : split_list(buses_csv)) buses.push_back(std::stoi(tok));
            const auto rows = scaled_perturbation_eval(ck.params, data.clean, levels, buses, cfg.seed);
            std::ofstream sj(out_path);
            sj << sweep_to_json(rows, hash).dump(2) << "\n";
            std::cout << "wrote sweep (" << rows.size() << " rows) to " << out_path << "\n";
            return kExitOk;
        }

        if (*cmd_ablation) {
            if (!out_override.empty()) cfg.out_dir = out_override;
            run_ablation(cfg, raw);
            std::cout << "ablation bundle written to " << cfg.out_dir << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitOk;
}
