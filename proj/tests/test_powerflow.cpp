#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cases.hpp"

using namespace gridshield;
using namespace gridshield::testcases;

TEST_CASE("2-bus zero load converges to the flat state immediately") {
    NetworkModel m = parse_case(kTwoBus);
    m.buses[1].pd = 0.0;
    m.buses[1].qd = 0.0;
    const Admittance y = build_admittance(m);
    const PowerFlowState pf = solve_nr(m, y, schedule_from_model(m));
    CHECK(pf.iterations <= 1);
    CHECK(pf.v[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pf.theta[1] == doctest::Approx(0.0));
}

TEST_CASE("2-bus load inverts the hand example") {
    const NetworkModel m = parse_case(kTwoBus);
    const Admittance y = build_admittance(m);
    const PowerFlowState pf = solve_nr(m, y, schedule_from_model(m));
    CHECK(pf.theta[1] == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(pf.v[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("IEEE 118 base case converges fast and reproduces the schedule") {
    const NetworkModel m = parse_case_file(case118_path());
    const Admittance y = build_admittance(m);
    const Schedule sched = schedule_from_model(m);
    const PowerFlowState pf = solve_nr(m, y, sched);
    CHECK(pf.iterations <= 10);
    CHECK(pf.max_mismatch < 1e-8);
    auto [p, q] = ac_injections(pf.v, pf.theta, y);
    const int slack = m.slack();
    for (int i = 0; i < m.n_bus(); ++i) {
        if (i == slack) continue;
        CHECK(std::abs(p[i] - sched.p[i]) < 1e-8);
        if (m.buses[i].type == BusType::PQ) CHECK(std::abs(q[i] - sched.q[i]) < 1e-8);
    }
}

TEST_CASE("non-convergence carries the final mismatch") {
    NetworkModel m = parse_case(kTwoBus);
    m.buses[1].pd = 50.0;  // far beyond the line's transfer capability
    const Admittance y = build_admittance(m);
    try {
        solve_nr(m, y, schedule_from_model(m));
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.final_mismatch > 0.0);
        CHECK(e.iterations == 20);
    }
}

TEST_CASE("singular Jacobian is reported") {
    // out-of-service branch isolates bus 2; its Jacobian rows vanish
    NetworkModel m = parse_case(kTwoBus);
    m.branches[0].in_service = false;
    const Admittance y = build_admittance(m);
    CHECK_THROWS_AS(solve_nr(m, y, schedule_from_model(m)), ValidationError);
}

TEST_CASE("n_samples = 0 gives an empty dataset") {
    const NetworkModel m = parse_case(kFourBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 0;
    CHECK(generate_snapshots(m, y, cfg).rows.empty());
}

TEST_CASE("degenerate config reproduces the base-case solution") {
    const NetworkModel m = parse_case(kFourBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 5;
    cfg.load_scale_lo = cfg.load_scale_hi = 1.0;
    cfg.per_bus_jitter_sigma = 0.0;
    cfg.noise_sigma_pq = 0.0;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    REQUIRE(set.rows.size() == 5);
    const Snapshot base = solved_snapshot(m, y);
    for (const auto& snap : set.rows) {
        CHECK((snap.v - base.v).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((snap.p - base.p).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("generation is deterministic and parallel-invariant") {
    const NetworkModel m = parse_case(kFiveBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 40;
    cfg.rng_seed = 123;
    const SnapshotSet a = generate_snapshots(m, y, cfg, 1);
    const SnapshotSet b = generate_snapshots(m, y, cfg, 4);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK((a.rows[i].p - b.rows[i].p).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.rows[i].v - b.rows[i].v).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.rows[i].seed == b.rows[i].seed);
    }
}

TEST_CASE("labels are never noisy") {
    const NetworkModel m = parse_case(kFiveBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 20;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    for (const auto& snap : set.rows) {
        auto [p, q] = ac_injections(snap.v, snap.theta, y);
        CHECK((snap.p_clean - p).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((snap.q_clean - q).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("zero-injection buses are telemetered exactly") {
    const NetworkModel m = parse_case(kFourBus);  // bus 4 has no load or gen
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 10;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    for (const auto& snap : set.rows) {
        CHECK(std::abs(snap.p[3]) < 1e-6);
        CHECK(std::abs(snap.q[3]) < 1e-6);
        // non-zi buses do get noise
        CHECK(std::abs(snap.p[1] - snap.p_clean[1]) > 0.0);
    }
}

TEST_CASE("excess non-convergence aborts with a diagnostic") {
    NetworkModel m = parse_case(kTwoBus);
    m.buses[1].pd = 2.0;  // close to the loadability edge, scale pushes it over
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 20;
    cfg.load_scale_lo = 4.0;
    cfg.load_scale_hi = 5.0;
    CHECK_THROWS_AS(generate_snapshots(m, y, cfg), ValidationError);
}

TEST_CASE("residual scales: floor binds on a noiseless dataset") {
    const NetworkModel m = parse_case(kFourBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 5;
    cfg.noise_sigma_pq = 0.0;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    const ResidualScales rs = residual_scales(set, y);
    CHECK(rs.tau_bar_p == doctest::Approx(0.01));
    CHECK(rs.tau_bar_q == doctest::Approx(0.01));
    CHECK(rs.tau_p == doctest::Approx(0.0095));
}

TEST_CASE("residual scales: single forced residual") {
    const NetworkModel m = parse_case(kFourBus);
    const Admittance y = build_admittance(m);
    SnapshotSet set;
    set.n_bus = 4;
    Snapshot snap = solved_snapshot(m, y);
    snap.p[1] += 0.2;
    set.rows.push_back(snap);
    const ResidualScales rs = residual_scales(set, y);
    CHECK(rs.tau_bar_p == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(rs.tau_p == doctest::Approx(0.19).epsilon(1e-12));
    CHECK(rs.tau_p / rs.tau_bar_p == doctest::Approx(0.95));
}

TEST_CASE("noisy dataset keeps the exact 0.95 ratio") {
    const NetworkModel m = parse_case(kFiveBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 50;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    const ResidualScales rs = residual_scales(set, y);
    CHECK(rs.tau_bar_p >= 0.01);
    CHECK(rs.tau_p == doctest::Approx(0.95 * rs.tau_bar_p).epsilon(1e-15));
}

TEST_CASE("snapshot CSV round trip") {
    const NetworkModel m = parse_case(kFourBus);
    const Admittance y = build_admittance(m);
    SnapshotSetConfig cfg;
    cfg.n_samples = 7;
    const SnapshotSet set = generate_snapshots(m, y, cfg);
    const std::string path = "test_snapshots_tmp.csv";
    write_snapshot_csv(set, path);
    const SnapshotSet back = read_snapshot_csv(path);
    REQUIRE(back.rows.size() == set.rows.size());
    CHECK(back.n_bus == 4);
    for (size_t i = 0; i < set.rows.size(); ++i) {
        CHECK((back.rows[i].p - set.rows[i].p).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.rows[i].theta - set.rows[i].theta).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back.rows[i].kind == set.rows[i].kind);
        CHECK(back.rows[i].seed == set.rows[i].seed);
    }
    std::remove(path.c_str());
}
