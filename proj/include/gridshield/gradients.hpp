#pragma once

#include "gridshield/objective.hpp"

namespace gridshield {

struct Gradients {
    std::vector<Mat> dw;
    std::vector<Vec> db;
    std::array<double, 4> ds{0.0, 0.0, 0.0, 0.0};

    static Gradients zeros_like(const MlpParams& params);
    bool all_finite() const;
};

struct StepEval {
    ComponentLosses losses;
    ObjectiveParts parts;
};

// Evaluates the full training objective on a batch and, when grads is given,
// its exact reverse-mode gradients wrt every network parameter and the four
// log-uncertainties. The chain runs through the MLP, the AC injection
// reconstruction of the predicted state, the batch reference moments of the
// normalized losses, and the clip/hinge subgradients (0 outside the clip
// bounds, 0 on the inactive hinge side). In fixed/frozen regimes ds == 0.
StepEval objective_and_gradients(const MlpParams& params, const UncertaintyState& u,
                                 const Batch& batch, const Admittance& y, double lambda_r,
                                 double eps_norm, double eps_ratio, Gradients* grads);

}  // namespace gridshield
