#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cases.hpp"
#include "gridshield/rng.hpp"

using namespace gridshield;
using namespace gridshield::testcases;

namespace {

struct GradCheckSetup {
    NetworkModel model;
    Admittance y;
    SnapshotSet set;
    Batch batch;
    MlpParams params;
};

GradCheckSetup make_setup(uint64_t seed) {
    GradCheckSetup s;
    s.model = parse_case(kFourBus);
    s.y = build_admittance(s.model);
    SnapshotSetConfig cfg;
    cfg.n_samples = 6;
    cfg.rng_seed = seed;
    s.set = generate_snapshots(s.model, s.y, cfg);
    std::vector<int> idx(s.set.rows.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    s.batch = make_batch(s.set, idx);
    s.params = init_mlp(4, 2, 6, seed + 1);
    return s;
}

double total_at(const GradCheckSetup& s, const UncertaintyState& u, const MlpParams& params,
                double lambda_r) {
    return objective_and_gradients(params, u, s.batch, s.y, lambda_r, 1e-8, 1e-12, nullptr)
        .parts.total;
}

// one finite-difference check of a single weight coordinate
double fd_weight(const GradCheckSetup& s, const UncertaintyState& u, MlpParams params, int layer,
                 int i, int j, double lambda_r, double h = 1e-5) {
    params.w[layer](i, j) += h;
    const double up = total_at(s, u, params, lambda_r);
    params.w[layer](i, j) -= 2 * h;
    const double dn = total_at(s, u, params, lambda_r);
    return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences (all regimes)") {
    const GradCheckSetup s = make_setup(17);
    const double lambda_r = 0.7;
    for (Regime regime : {Regime::dynamic, Regime::fixed, Regime::frozen}) {
        UncertaintyState u;
        u.regime = regime;
        u.s = {0.3, -0.2, 0.1, -0.4};
        Gradients grads;
        objective_and_gradients(s.params, u, s.batch, s.y, lambda_r, 1e-8, 1e-12, &grads);

        auto eng = make_engine(99, static_cast<uint64_t>(regime));
        int checked = 0;
        double max_rel = 0.0;
        while (checked < 40) {
            const int layer = static_cast<int>(uniform01(eng) * s.params.w.size()) %
                              static_cast<int>(s.params.w.size());
            const int i = static_cast<int>(uniform01(eng) * s.params.w[layer].rows());
            const int j = static_cast<int>(uniform01(eng) * s.params.w[layer].cols());
            const double fd = fd_weight(s, u, s.params, layer, i, j, lambda_r);
            const double an = grads.dw[layer](i, j);
            max_rel = std::max(max_rel, std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
            ++checked;
        }
        CHECK(max_rel < 1e-4);

        if (regime == Regime::dynamic) {
            for (int m = 0; m < 4; ++m) {
                UncertaintyState up = u, dn = u;
                up.s[m] += 1e-5;
                dn.s[m] -= 1e-5;
                const double fd =
                    (total_at(s, up, s.params, lambda_r) - total_at(s, dn, s.params, lambda_r)) / 2e-5;
                CHECK(std::abs(grads.ds[m] - fd) / std::max({1.0, std::abs(fd)}) < 1e-4);
            }
        }
    }
}

TEST_CASE("bias gradients match finite differences") {
    const GradCheckSetup s = make_setup(23);
    UncertaintyState u;
    Gradients grads;
    objective_and_gradients(s.params, u, s.batch, s.y, 0.5, 1e-8, 1e-12, &grads);
    auto eng = make_engine(7, 1);
    for (int check = 0; check < 10; ++check) {
        const int layer = static_cast<int>(uniform01(eng) * s.params.b.size()) %
                          static_cast<int>(s.params.b.size());
        const int i = static_cast<int>(uniform01(eng) * s.params.b[layer].size());
        MlpParams p2 = s.params;
        p2.b[layer][i] += 1e-5;
        const double up = total_at(s, u, p2, 0.5);
        p2.b[layer][i] -= 2e-5;
        const double dn = total_at(s, u, p2, 0.5);
        const double fd = (up - dn) / 2e-5;
        CHECK(std::abs(grads.db[layer][i] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
    }
}

TEST_CASE("physics-heavy state deactivates the ratio penalty gradient") {
    const GradCheckSetup s = make_setup(31);
    UncertaintyState u;
    u.s = {-1.0, -1.0, 1.0, 1.0};  // W_phys >> W_data -> Delta < 0
    Gradients with_pen, without_pen;
    objective_and_gradients(s.params, u, s.batch, s.y, 5.0, 1e-8, 1e-12, &with_pen);
    objective_and_gradients(s.params, u, s.batch, s.y, 0.0, 1e-8, 1e-12, &without_pen);
    for (int m = 0; m < 4; ++m)
        CHECK(with_pen.ds[m] == doctest::Approx(without_pen.ds[m]).epsilon(1e-15));
}

TEST_CASE("fixed and frozen regimes have identically zero s-gradients") {
    const GradCheckSetup s = make_setup(37);
    for (Regime regime : {Regime::fixed, Regime::frozen}) {
        UncertaintyState u;
        u.regime = regime;
        u.s = {0.5, 0.1, -0.3, 0.2};
        Gradients grads;
        objective_and_gradients(s.params, u, s.batch, s.y, 1.0, 1e-8, 1e-12, &grads);
        for (int m = 0; m < 4; ++m) CHECK(grads.ds[m] == 0.0);
    }
}

TEST_CASE("clip boundary zeroes the s-gradient outside the bounds") {
    const GradCheckSetup s = make_setup(41);
    UncertaintyState u;
    u.s = {3.0, -5.0, 0.0, 0.0};  // outside [-4, 2]
    Gradients grads;
    objective_and_gradients(s.params, u, s.batch, s.y, 1.0, 1e-8, 1e-12, &grads);
    CHECK(grads.ds[0] == 0.0);
    CHECK(grads.ds[1] == 0.0);
    CHECK(grads.ds[2] != 0.0);
}

TEST_CASE("injection adjoint matches finite differences directly") {
    const NetworkModel m = parse_case(kFiveBus);
    const Admittance y = build_admittance(m);
    auto eng = make_engine(55, 0);
    Vec v(5), theta(5), lam_p(5), lam_q(5);
    for (int i = 0; i < 5; ++i) {
        v[i] = uniform(eng, 0.95, 1.05);
        theta[i] = uniform(eng, -0.4, 0.4);
        lam_p[i] = uniform(eng, -1, 1);
        lam_q[i] = uniform(eng, -1, 1);
    }
    Vec dv = Vec::Zero(5), dth = Vec::Zero(5);
    ac_injection_adjoint(v, theta, y, lam_p, lam_q, dv, dth);
    auto scalar = [&](const Vec& vv, const Vec& tt) {
        auto [p, q] = ac_injections(vv, tt, y);
        return lam_p.dot(p) + lam_q.dot(q);
    };
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
        Vec vp = v, vm = v;
        vp[i] += h;
        vm[i] -= h;
        CHECK(dv[i] == doctest::Approx((scalar(vp, theta) - scalar(vm, theta)) / (2 * h)).epsilon(1e-5));
        Vec tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        CHECK(dth[i] == doctest::Approx((scalar(v, tp) - scalar(v, tm)) / (2 * h)).epsilon(1e-5));
    }
}
