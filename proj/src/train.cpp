#include "gridshield/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "gridshield/log.hpp"
#include "gridshield/rng.hpp"
#include "json.hpp"

namespace gridshield {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob writer assumes a little-endian host");

void TrainConfig::validate() const {
    if (n_layers < 1 || width < 1 || batch < 1) throw ValidationError("bad train config shape");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (lr <= 0 || lambda_r < 0) throw ValidationError("lr must be > 0, lambda_r >= 0");
    if (eps_norm <= 0 || eps_ratio <= 0) throw ValidationError("eps guards must be > 0");
    if (s_min > s_max) throw ValidationError("s_min > s_max");
}

namespace {

// Adam moments mirroring the parameter layout; same optimizer and lr drive
// the network weights and the log-uncertainties.
struct AdamState {
    std::vector<Mat> mw, vw;
    std::vector<Vec> mb, vb;
    std::array<double, 4> ms{0, 0, 0, 0}, vs{0, 0, 0, 0};
    long step = 0;
    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(const MlpParams& p) {
        for (size_t l = 0; l < p.w.size(); ++l) {
            mw.push_back(Mat::Zero(p.w[l].rows(), p.w[l].cols()));
            vw.push_back(Mat::Zero(p.w[l].rows(), p.w[l].cols()));
            mb.push_back(Vec::Zero(p.b[l].size()));
            vb.push_back(Vec::Zero(p.b[l].size()));
        }
    }

    void update(MlpParams& p, UncertaintyState& u, const Gradients& g, double lr, bool update_s) {
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, step);
        const double bc2 = 1.0 - std::pow(beta2, step);
        for (size_t l = 0; l < p.w.size(); ++l) {
            mw[l] = beta1 * mw[l] + (1 - beta1) * g.dw[l];
            vw[l] = beta2 * vw[l] + (1 - beta2) * g.dw[l].cwiseProduct(g.dw[l]);
            p.w[l] -= lr * (mw[l] / bc1).cwiseQuotient(((vw[l] / bc2).cwiseSqrt().array() + eps).matrix());
            mb[l] = beta1 * mb[l] + (1 - beta1) * g.db[l];
            vb[l] = beta2 * vb[l] + (1 - beta2) * g.db[l].cwiseProduct(g.db[l]);
            p.b[l] -= lr * (mb[l] / bc1).cwiseQuotient(((vb[l] / bc2).cwiseSqrt().array() + eps).matrix());
        }
        if (update_s) {
            for (int m = 0; m < 4; ++m) {
                ms[m] = beta1 * ms[m] + (1 - beta1) * g.ds[m];
                vs[m] = beta2 * vs[m] + (1 - beta2) * g.ds[m] * g.ds[m];
                u.s[m] -= lr * (ms[m] / bc1) / (std::sqrt(vs[m] / bc2) + eps);
            }
        }
    }
};

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "epoch,total,L_p,L_q,L_v,L_theta,w_p,w_q,w_v,w_theta,W_phys,W_data,ratio\n";
    for (size_t e = 0; e < trace.rows.size(); ++e) {
        const TraceRow& r = trace.rows[e];
        out << e << "," << fmt_double(r.total) << "," << fmt_double(r.lp) << ","
            << fmt_double(r.lq) << "," << fmt_double(r.lv) << "," << fmt_double(r.ltheta);
        for (int m = 0; m < 4; ++m) out << "," << fmt_double(r.w[m]);
        out << "," << fmt_double(r.w_phys) << "," << fmt_double(r.w_data) << ","
            << fmt_double(r.ratio) << "\n";
    }
}

std::pair<SnapshotSet, SnapshotSet> split_dataset(const SnapshotSet& set, double val_fraction,
                                                  uint64_t seed) {
    std::vector<int> idx(set.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto eng = make_engine(seed, 0x5b717, 0);
    std::shuffle(idx.begin(), idx.end(), eng);
    const size_t n_val = static_cast<size_t>(std::llround(val_fraction * set.rows.size()));
    SnapshotSet train, val;
    train.n_bus = val.n_bus = set.n_bus;
    for (size_t k = 0; k < idx.size(); ++k)
        (k < n_val ? val : train).rows.push_back(set.rows[idx[k]]);
    return {std::move(train), std::move(val)};
}

TrainResult train(const SnapshotSet& train_set, const SnapshotSet& val_set, const Admittance& y,
                  const TrainConfig& cfg, Regime regime, const std::array<double, 4>* frozen_s) {
    cfg.validate();
    if (train_set.rows.empty()) throw ValidationError("train: empty training set");

    TrainResult res;
    res.params = init_mlp(train_set.n_bus, cfg.n_layers, cfg.width, cfg.rng_seed);
    res.u.regime = regime;
    res.u.s_min = cfg.s_min;
    res.u.s_max = cfg.s_max;
    switch (regime) {
        case Regime::dynamic:
            res.u.s = {0.0, 0.0, 0.0, 0.0};
            break;
        case Regime::fixed:
            res.u.s = cfg.fixed_s;
            break;
        case Regime::frozen:
            if (!frozen_s) throw ValidationError("frozen regime requires prior dynamic s values");
            res.u.s = *frozen_s;
            break;
    }

    AdamState adam(res.params);
    const int n_rows = static_cast<int>(train_set.rows.size());
    std::vector<int> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    Gradients grads;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto eng = make_engine(cfg.rng_seed, 0xe90c4, static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), eng);

        TraceRow row;
        int n_batches = 0;
        for (int start = 0; start < n_rows; start += cfg.batch, ++n_batches) {
            const int len = std::min(cfg.batch, n_rows - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + len);
            const Batch batch = make_batch(train_set, idx);
            StepEval eval;
            try {
                eval = objective_and_gradients(res.params, res.u, batch, y, cfg.lambda_r,
                                               cfg.eps_norm, cfg.eps_ratio, &grads);
            } catch (const TrainError& e) {
                throw TrainError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(n_batches));
            }
            if (!std::isfinite(eval.parts.total))
                throw TrainError("NaN loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(n_batches));
            adam.update(res.params, res.u, grads, cfg.lr, regime == Regime::dynamic);
            row.total += eval.parts.total;
            row.lp += eval.losses.l[kCompP];
            row.lq += eval.losses.l[kCompQ];
            row.lv += eval.losses.l[kCompV];
            row.ltheta += eval.losses.l[kCompTheta];
        }
        const double inv = 1.0 / std::max(1, n_batches);
        row.total *= inv;
        row.lp *= inv;
        row.lq *= inv;
        row.lv *= inv;
        row.ltheta *= inv;
        for (int m = 0; m < 4; ++m) row.w[m] = res.u.weight(m);
        row.w_phys = res.u.w_phys();
        row.w_data = res.u.w_data();
        row.ratio = row.w_phys / (row.w_data + cfg.eps_ratio);
        res.trace.rows.push_back(row);
        res.final_train_loss = row.total;
    }

    if (!val_set.rows.empty()) {
        std::vector<int> all(val_set.rows.size());
        std::iota(all.begin(), all.end(), 0);
        const Batch vb = make_batch(val_set, all);
        const ComponentLosses cl = component_losses(res.params, vb, y, cfg.eps_norm);
        res.val_loss = dynamic_objective(cl, res.u, cfg.lambda_r, cfg.eps_ratio).total;
    }
    return res;
}

SearchOutcome random_search(const SnapshotSet& train_set, const SnapshotSet& val_set,
                            const Admittance& y, const RandomSearchSpace& space, Regime regime,
                            int n_trials, uint64_t seed) {
    if (n_trials < 1) throw ValidationError("random_search: n_trials must be >= 1");
    SearchOutcome out;
    out.best_val_loss = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n_trials; ++t) {
        auto eng = make_engine(seed, 0x7e571a1, static_cast<uint64_t>(t));
        TrainConfig cfg;
        cfg.n_layers = space.layer_choices[static_cast<size_t>(uniform01(eng) * space.layer_choices.size()) %
                                           space.layer_choices.size()];
        cfg.width = space.width_lo +
                    static_cast<int>(uniform01(eng) * (space.width_hi - space.width_lo + 1));
        cfg.batch = space.batch_lo +
                    static_cast<int>(uniform01(eng) * (space.batch_hi - space.batch_lo + 1));
        cfg.lr = std::exp(uniform(eng, std::log(space.lr_lo), std::log(space.lr_hi)));
        cfg.lambda_r = std::exp(uniform(eng, std::log(space.lambda_r_lo), std::log(space.lambda_r_hi)));
        if (regime == Regime::fixed)
            for (int m = 0; m < 4; ++m) cfg.fixed_s[m] = uniform(eng, space.fixed_s_lo, space.fixed_s_hi);
        cfg.epochs = space.trial_epochs;
        cfg.rng_seed = derive_seed(seed, 0x7e571a1, static_cast<uint64_t>(t), 1);

        double val = std::numeric_limits<double>::quiet_NaN();
        try {
            val = train(train_set, val_set, y, cfg, regime).val_loss;
        } catch (const TrainError&) {
            // diverged trial; recorded as NaN and skipped by selection
        }
        out.trial_val_losses.push_back(val);
        log_event("search_trial", {{"trial", t},
                                   {"width", cfg.width},
                                   {"layers", cfg.n_layers},
                                   {"lr", cfg.lr},
                                   {"lambda_r", cfg.lambda_r},
                                   {"val_loss", std::isfinite(val) ? val : -1.0}});
        if (std::isfinite(val) && val < out.best_val_loss) {
            out.best_val_loss = val;
            out.best = cfg;
        }
    }
    if (!std::isfinite(out.best_val_loss))
        throw TrainError("random_search: every trial diverged");
    return out;
}

namespace {
constexpr char kCkptMagic[8] = {'G', 'S', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const std::string& path, const MlpParams& params, const UncertaintyState& u,
                     const TrainConfig& cfg, Regime regime) {
    nlohmann::json header;
    header["schema_version"] = 1;
    header["n_bus"] = params.n_bus();
    for (size_t l = 0; l < params.w.size(); ++l)
        header["layers"].push_back({{"in", params.w[l].rows()}, {"out", params.w[l].cols()}});
    header["regime"] = regime_name(regime);
    header["s"] = u.s;
    header["s_min"] = u.s_min;
    header["s_max"] = u.s_max;
    header["cfg"] = {{"n_layers", cfg.n_layers}, {"width", cfg.width},   {"batch", cfg.batch},
                     {"lr", cfg.lr},             {"lambda_r", cfg.lambda_r}, {"epochs", cfg.epochs},
                     {"eps_norm", cfg.eps_norm}, {"eps_ratio", cfg.eps_ratio},
                     {"rng_seed", cfg.rng_seed}, {"fixed_s", cfg.fixed_s}};
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (size_t l = 0; l < params.w.size(); ++l) {
        // row-major weight layout
        for (Eigen::Index i = 0; i < params.w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < params.w[l].cols(); ++j) {
                const double v = params.w[l](i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        out.write(reinterpret_cast<const char*>(params.b[l].data()),
                  static_cast<std::streamsize>(params.b[l].size() * sizeof(double)));
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw ParseError(path + ": not a gridshield checkpoint");
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError(path + ": truncated header");
    const nlohmann::json header = nlohmann::json::parse(head);

    Checkpoint ck;
    ck.regime = regime_from_name(header.at("regime").get<std::string>());
    ck.u.regime = ck.regime;
    ck.u.s = header.at("s").get<std::array<double, 4>>();
    ck.u.s_min = header.at("s_min").get<double>();
    ck.u.s_max = header.at("s_max").get<double>();
    const auto& jc = header.at("cfg");
    ck.cfg.n_layers = jc.at("n_layers").get<int>();
    ck.cfg.width = jc.at("width").get<int>();
    ck.cfg.batch = jc.at("batch").get<int>();
    ck.cfg.lr = jc.at("lr").get<double>();
    ck.cfg.lambda_r = jc.at("lambda_r").get<double>();
    ck.cfg.epochs = jc.at("epochs").get<int>();
    ck.cfg.eps_norm = jc.at("eps_norm").get<double>();
    ck.cfg.eps_ratio = jc.at("eps_ratio").get<double>();
    ck.cfg.rng_seed = jc.at("rng_seed").get<uint64_t>();
    ck.cfg.fixed_s = jc.at("fixed_s").get<std::array<double, 4>>();

    for (const auto& layer : header.at("layers")) {
        const Eigen::Index rows = layer.at("in").get<Eigen::Index>();
        const Eigen::Index cols = layer.at("out").get<Eigen::Index>();
        Mat w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                double v;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                w(i, j) = v;
            }
        Vec b(cols);
        in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(cols * sizeof(double)));
        if (!in) throw ParseError(path + ": truncated weight blob");
        ck.params.w.push_back(std::move(w));
        ck.params.b.push_back(std::move(b));
    }
    return ck;
}

}  // namespace gridshield
