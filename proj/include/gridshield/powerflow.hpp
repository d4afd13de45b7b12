#pragma once

#include "gridshield/admittance.hpp"

namespace gridshield {

// Scheduled operating point: net injections per bus plus PV/slack voltage
// setpoints. Slack P/Q and PV Q entries are ignored by the solver.
struct Schedule {
    Vec p, q;   // net scheduled injection, p.u.
    Vec v_set;  // per-bus; used for PV and slack buses
};

// Default schedule from the case data: p = sum(pg) - pd per bus, setpoints
// from the first in-service generator (falling back to the case vm).
Schedule schedule_from_model(const NetworkModel& model);

struct NrOptions {
    double tol = 1e-8;  // max |mismatch| in p.u.
    int max_iter = 20;
    bool flat_start = true;  // V=setpoint/1.0, theta=0; otherwise start required
};

struct PowerFlowState {
    Vec v, theta;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Polar Newton-Raphson over the mismatch equations. Q limits on PV buses are
// not enforced (single pass). Throws ConvergenceError carrying the final
// mismatch, ValidationError on a singular Jacobian.
PowerFlowState solve_nr(const NetworkModel& model, const Admittance& y, const Schedule& sched,
                        const NrOptions& opts = {}, const PowerFlowState* start = nullptr);

}  // namespace gridshield
