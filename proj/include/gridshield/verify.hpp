#pragma once

#include "gridshield/attack.hpp"

namespace gridshield {

// Independent feasibility checker: recomputes every shared and family
// constraint directly from the attacked snapshot with case_model primitives;
// nothing is reused from the attack solver. Exact |.| arithmetic throughout.
// Passes iff every group violation is <= tol.
FeasibilityReport verify_feasibility(const NetworkModel& model, const Admittance& y,
                                     const GridGraph& graph, const Snapshot& baseline,
                                     const Snapshot& attacked, const AttackZone& zone,
                                     const FeasibleSetConfig& feasible, const FamilyConfig& family,
                                     double tol = 1e-6);

FeasibilityReport verify_result(const AttackProblem& problem, const Snapshot& attacked,
                                double tol = 1e-6);

}  // namespace gridshield
