#include "dcrr/penalty.hpp"

#include <algorithm>
#include <cmath>

namespace dcrr {

double penalty_deriv(const PenaltySpec& spec, double v) {
    if (v < 0.0) throw std::invalid_argument("penalty_deriv: v must be >= 0");
    const double lam = spec.lambda;
    switch (spec.kind) {
        case PenaltyKind::L1:
            return lam;
        case PenaltyKind::SCAD:
            if (v <= lam) return lam;
            return std::max(spec.shape * lam - v, 0.0) / (spec.shape - 1.0);
        case PenaltyKind::MCP:
            return std::max(lam - v / spec.shape, 0.0);
    }
    return 0.0;
}

Eigen::VectorXd lla_weights(const PenaltySpec& spec, const Eigen::VectorXd& beta_anchor) {
    Eigen::VectorXd w(beta_anchor.size());
    for (Eigen::Index j = 0; j < beta_anchor.size(); ++j)
        w[j] = penalty_deriv(spec, std::abs(beta_anchor[j]));
    return w;
}

}  // namespace dcrr
