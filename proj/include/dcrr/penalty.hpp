#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace dcrr {

enum class PenaltyKind { L1, SCAD, MCP };

// Coefficients below this magnitude count as zero for support/FP/FN purposes.
constexpr double kSupportThreshold = 1e-8;

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::L1;
    double lambda = 0.0;
    double shape = 3.7;  // SCAD a (> 2) or MCP gamma (> 1); ignored for L1

    PenaltySpec() = default;
    PenaltySpec(PenaltyKind k, double lam, double sh = 0.0)
        : kind(k), lambda(lam), shape(sh) {
        if (lambda < 0.0) throw std::invalid_argument("PenaltySpec: lambda must be >= 0");
        if (kind == PenaltyKind::SCAD) {
            if (shape == 0.0) shape = 3.7;
            if (shape <= 2.0) throw std::invalid_argument("PenaltySpec: SCAD a must be > 2");
        } else if (kind == PenaltyKind::MCP) {
            if (shape == 0.0) shape = 3.0;
            if (shape <= 1.0) throw std::invalid_argument("PenaltySpec: MCP gamma must be > 1");
        }
    }
};

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Derivative of the penalty at v >= 0. Starts at lambda, nonincreasing,
// and (for SCAD/MCP) vanishes beyond shape*lambda.
double penalty_deriv(const PenaltySpec& spec, double v);

// Per-coordinate weights for the local linear approximation step:
// w_j = penalty_deriv(|anchor_j|).
Eigen::VectorXd lla_weights(const PenaltySpec& spec, const Eigen::VectorXd& beta_anchor);

}  // namespace dcrr
