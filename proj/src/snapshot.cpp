#include "gridshield/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridshield/log.hpp"
#include "gridshield/parallel.hpp"
#include "gridshield/rng.hpp"

namespace gridshield {

namespace {
constexpr double kZeroInjectionTol = 1e-6;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void SnapshotSetConfig::validate() const {
    if (n_samples < 0) throw ValidationError("n_samples must be >= 0");
    if (load_scale_lo > load_scale_hi) throw ValidationError("load_scale range: lo > hi");
    if (per_bus_jitter_sigma < 0 || noise_sigma_pq < 0)
        throw ValidationError("jitter/noise sigmas must be >= 0");
}

SnapshotSet generate_snapshots(const NetworkModel& model, const Admittance& y,
                               const SnapshotSetConfig& cfg, int threads) {
    cfg.validate();
    const int n = model.n_bus();
    const Schedule base = schedule_from_model(model);

    double total_load = 0.0;
    for (const auto& bus : model.buses) total_load += bus.pd;

    std::vector<Snapshot> slots(cfg.n_samples);
    std::vector<char> ok(cfg.n_samples, 0);

    parallel_for(cfg.n_samples, [&](int idx) {
        auto eng = make_engine(cfg.rng_seed, static_cast<uint64_t>(idx));
        const uint64_t sample_seed = derive_seed(cfg.rng_seed, static_cast<uint64_t>(idx));
        // draw order is fixed: global scale, per-bus jitter, then noise
        const double scale = uniform(eng, cfg.load_scale_lo, cfg.load_scale_hi);
        Vec jitter(n);
        for (int i = 0; i < n; ++i) jitter[i] = 1.0 + cfg.per_bus_jitter_sigma * gaussian(eng);
        Vec noise_p(n), noise_q(n);
        for (int i = 0; i < n; ++i) {
            noise_p[i] = cfg.noise_sigma_pq * gaussian(eng);
            noise_q[i] = cfg.noise_sigma_pq * gaussian(eng);
        }

        Schedule sched = base;
        double new_load = 0.0;
        for (int i = 0; i < n; ++i) {
            const double f = scale * jitter[i];
            sched.p[i] = base.p[i] + model.buses[i].pd - model.buses[i].pd * f;
            sched.q[i] = base.q[i] + model.buses[i].qd - model.buses[i].qd * f;
            new_load += model.buses[i].pd * f;
        }
        // proportional redispatch on PV-bus generation; slack absorbs the rest
        if (total_load > 0.0) {
            const double ratio = new_load / total_load;
            for (const auto& g : model.gens) {
                if (!g.in_service || model.buses[g.bus].type != BusType::PV) continue;
                sched.p[g.bus] += g.pg * (ratio - 1.0);
            }
        }

        PowerFlowState pf;
        try {
            pf = solve_nr(model, y, sched);
        } catch (const ConvergenceError&) {
            return;  // slot stays empty
        }

        Snapshot snap;
        snap.v = pf.v;
        snap.theta = pf.theta;
        auto [p_inj, q_inj] = ac_injections(pf.v, pf.theta, y);
        snap.p_clean = p_inj;
        snap.q_clean = q_inj;
        snap.p = p_inj;
        snap.q = q_inj;
        for (int i = 0; i < n; ++i) {
            // zero-injection buses are telemetered as exact zeros
            if (std::abs(p_inj[i]) < kZeroInjectionTol && std::abs(q_inj[i]) < kZeroInjectionTol)
                continue;
            snap.p[i] += noise_p[i];
            snap.q[i] += noise_q[i];
        }
        snap.kind = "clean";
        snap.seed = sample_seed;
        slots[idx] = std::move(snap);
        ok[idx] = 1;
    }, threads);

    int failed = 0;
    SnapshotSet out;
    out.n_bus = n;
    out.rows.reserve(cfg.n_samples);
    for (int idx = 0; idx < cfg.n_samples; ++idx) {
        if (ok[idx])
            out.rows.push_back(std::move(slots[idx]));
        else
            ++failed;
    }
    if (failed > 0) {
        log_event("snapshot_nonconvergence",
                  {{"failed", failed}, {"requested", cfg.n_samples}});
        if (cfg.n_samples > 0 && failed * 10 > cfg.n_samples)
            throw ValidationError("snapshot generation aborted: " + std::to_string(failed) + "/" +
                                  std::to_string(cfg.n_samples) +
                                  " samples failed to converge (>10%)");
    }
    return out;
}

ResidualScales residual_scales(const SnapshotSet& set, const Admittance& y, double floor) {
    if (set.rows.empty()) throw ValidationError("residual_scales on empty dataset");
    ResidualScales rs;
    Vec p_inj, q_inj;
    for (const auto& snap : set.rows) {
        ac_injections(snap.v, snap.theta, y, p_inj, q_inj);
        rs.tau_bar_p = std::max(rs.tau_bar_p, (snap.p - p_inj).cwiseAbs().maxCoeff());
        rs.tau_bar_q = std::max(rs.tau_bar_q, (snap.q - q_inj).cwiseAbs().maxCoeff());
    }
    rs.tau_bar_p = std::max(rs.tau_bar_p, floor);
    rs.tau_bar_q = std::max(rs.tau_bar_q, floor);
    rs.tau_p = 0.95 * rs.tau_bar_p;
    rs.tau_q = 0.95 * rs.tau_bar_q;
    return rs;
}

void write_snapshot_csv(const SnapshotSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    const int n = set.n_bus;
    bool attack_cols = false;
    for (const auto& r : set.rows)
        if (!r.family.empty()) attack_cols = true;

    auto block = [&](const char* prefix) {
        for (int i = 1; i <= n; ++i) out << prefix << "_" << i << ",";
    };
    block("P");
    block("Q");
    block("V");
    block("th");
    out << "kind,seed";
    if (attack_cols) out << ",family,zone_id,objective,max_violation";
    out << "\n";

    for (const auto& r : set.rows) {
        for (int i = 0; i < n; ++i) out << fmt_double(r.p[i]) << ",";
        for (int i = 0; i < n; ++i) out << fmt_double(r.q[i]) << ",";
        for (int i = 0; i < n; ++i) out << fmt_double(r.v[i]) << ",";
        for (int i = 0; i < n; ++i) out << fmt_double(r.theta[i]) << ",";
        out << r.kind << "," << r.seed;
        if (attack_cols)
            out << "," << r.family << "," << r.zone_id << "," << fmt_double(r.objective) << ","
                << fmt_double(r.max_violation);
        out << "\n";
    }
}

SnapshotSet read_snapshot_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path + ": empty file");

    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    int n = 0;
    while (n < static_cast<int>(cols.size()) && cols[n].rfind("P_", 0) == 0) ++n;
    if (n == 0 || static_cast<int>(cols.size()) < 4 * n + 2)
        throw ParseError(path + ": unrecognized snapshot CSV header");
    const bool attack_cols = cols.size() >= static_cast<size_t>(4 * n + 6);

    SnapshotSet set;
    set.n_bus = n;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        Snapshot r;
        r.p.resize(n);
        r.q.resize(n);
        r.v.resize(n);
        r.theta.resize(n);
        auto next = [&]() -> std::string {
            if (!std::getline(ls, tok, ','))
                throw ParseError(path + " line " + std::to_string(line_no) + ": short row");
            return tok;
        };
        auto next_d = [&]() { return std::stod(next()); };
        for (int i = 0; i < n; ++i) r.p[i] = next_d();
        for (int i = 0; i < n; ++i) r.q[i] = next_d();
        for (int i = 0; i < n; ++i) r.v[i] = next_d();
        for (int i = 0; i < n; ++i) r.theta[i] = next_d();
        r.kind = next();
        r.seed = std::stoull(next());
        if (attack_cols) {
            r.family = next();
            r.zone_id = std::stoi(next());
            r.objective = next_d();
            r.max_violation = next_d();
        }
        set.rows.push_back(std::move(r));
    }
    return set;
}

}  // namespace gridshield
