#include "gridshield/objective.hpp"

#include <cmath>

namespace gridshield {

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::dynamic: return "dynamic";
        case Regime::fixed: return "fixed";
        case Regime::frozen: return "frozen";
    }
    return "?";
}

Regime regime_from_name(const std::string& name) {
    if (name == "dynamic") return Regime::dynamic;
    if (name == "fixed") return Regime::fixed;
    if (name == "frozen") return Regime::frozen;
    throw ValidationError("unknown regime '" + name + "'");
}

double population_std(const Mat& block) {
    const double n = static_cast<double>(block.size());
    const double mean = block.sum() / n;
    const double var = (block.array() - mean).square().sum() / n;
    return std::sqrt(var);
}

double normalized_loss(const Vec& a, const Vec& b, double sigma_ref, double eps_norm) {
    if (a.size() != b.size() || a.size() == 0)
        throw ValidationError("normalized_loss: dimension mismatch");
    const double denom = sigma_ref + eps_norm;
    return ((a - b) / denom).squaredNorm() / static_cast<double>(a.size());
}

double normalized_loss(const Vec& a, const Vec& b, double eps_norm) {
    return normalized_loss(a, b, population_std(a), eps_norm);
}

Batch make_batch(const SnapshotSet& set, const std::vector<int>& indices) {
    const int n = set.n_bus;
    Batch batch;
    batch.x.resize(indices.size(), 2 * n);
    batch.v_label.resize(indices.size(), n);
    batch.th_label.resize(indices.size(), n);
    for (size_t r = 0; r < indices.size(); ++r) {
        const Snapshot& s = set.rows[indices[r]];
        batch.x.row(r).head(n) = s.p.transpose();
        batch.x.row(r).tail(n) = s.q.transpose();
        batch.v_label.row(r) = s.v.transpose();
        batch.th_label.row(r) = s.theta.transpose();
    }
    return batch;
}

ComponentLosses component_losses(const MlpParams& params, const Batch& batch, const Admittance& y,
                                 double eps_norm) {
    if (batch.rows() == 0) throw ValidationError("component_losses: empty batch");
    const int n = params.n_bus();
    const Mat out = forward_batch(params, batch.x);
    const OutputBlocks blocks = split_outputs(out, n);

    Mat p_inj(batch.rows(), n), q_inj(batch.rows(), n);
    Vec pi, qi;
    for (int r = 0; r < batch.rows(); ++r) {
        ac_injections(blocks.v.row(r).transpose(), blocks.theta.row(r).transpose(), y, pi, qi);
        p_inj.row(r) = pi.transpose();
        q_inj.row(r) = qi.transpose();
    }

    const double tp = population_std(blocks.p) + eps_norm;
    const double tq = population_std(blocks.q) + eps_norm;
    const double tv = population_std(batch.v_label) + eps_norm;
    const double tth = population_std(batch.th_label) + eps_norm;

    const double scale = 1.0 / (static_cast<double>(batch.rows()) * n);
    ComponentLosses out_l;
    out_l.l[kCompP] = (blocks.p - p_inj).squaredNorm() * scale / (tp * tp);
    out_l.l[kCompQ] = (blocks.q - q_inj).squaredNorm() * scale / (tq * tq);
    out_l.l[kCompV] = (batch.v_label - blocks.v).squaredNorm() * scale / (tv * tv);
    out_l.l[kCompTheta] = (batch.th_label - blocks.theta).squaredNorm() * scale / (tth * tth);
    return out_l;
}

ObjectiveParts dynamic_objective(const ComponentLosses& losses, const UncertaintyState& u,
                                 double lambda_r, double eps_ratio) {
    ObjectiveParts parts;
    for (int m = 0; m < 4; ++m) {
        parts.w[m] = u.weight(m);
        parts.j_dyn += 0.5 * parts.w[m] * losses.l[m] + u.clipped(m);
    }
    parts.w_phys = parts.w[kCompP] + parts.w[kCompQ];
    parts.w_data = parts.w[kCompV] + parts.w[kCompTheta];
    parts.ratio = parts.w_phys / (parts.w_data + eps_ratio);
    const double r_star = 1.0;  // n_phys = n_data = 2
    parts.delta = std::log(r_star + eps_ratio) - std::log(parts.ratio + eps_ratio);
    const double hinge = std::max(0.0, parts.delta);
    parts.p_ratio = lambda_r * hinge * hinge;
    parts.total = parts.j_dyn + parts.p_ratio;
    return parts;
}

}  // namespace gridshield
