#pragma once

#include "gridshield/attack.hpp"

namespace gridshield {

struct AlOptions {
    int max_outer = 50;
    int max_inner = 200;
    double feas_tol = 1e-6;        // exact max constraint violation
    double obj_stall_rel = 1e-8;   // relative best-objective change
    int stall_outers = 5;
    double mu0 = 10.0, mu_growth = 10.0, mu_max = 1e8;
    double inner_tol = 1e-9;       // projected-gradient norm
};

// Maximizes the family objective over the shared feasible set by an
// augmented-Lagrangian outer loop with a projected L-BFGS inner solve.
// Decision variables are the zone deltas (plus LRA redispatch splits);
// exterior buses stay bit-identical to the baseline. Two-sided |expr|<=t
// constraints enter as paired one-sided rows; the only smoothed terms are
// the LRA |dP| objective rewards (sqrt(x^2+1e-12)). Warm start at the
// baseline. Returns the best exactly-feasible iterate found.
AttackResult solve_attack(const AttackProblem& problem, const AlOptions& opts = {});

}  // namespace gridshield
