#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace dcrr {

struct SolveConfig {
    double tol = 1e-7;        // relative composite-objective change
    int max_iter = 2000;
    double backtrack_factor = 0.5;
    double init_step = 1.0;
};

// Smooth convex part of the composite objective: value and gradient callables.
struct SmoothOracle {
    std::function<double(const Eigen::VectorXd&)> loss;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
    Eigen::Index p = 0;
};

struct SolveResult {
    Eigen::VectorXd beta;
    std::vector<double> trace;  // composite objective per accepted iterate
    int iters = 0;
    bool converged = true;      // false when max_iter hit before tol
};

// Minimize oracle.loss(beta) + sum_j weights[j] * |beta_j| by accelerated
// proximal gradient (FISTA) with backtracking and adaptive restart.
// Thresholded coordinates come out as exact zeros.
SolveResult solve_weighted_l1(const SmoothOracle& oracle, const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& init, const SolveConfig& cfg);

// Minimize the smooth loss over the given coordinates with all others pinned
// to zero. Returns a full-length vector.
SolveResult solve_restricted(const SmoothOracle& oracle, const std::vector<Eigen::Index>& support,
                             const Eigen::VectorXd& init, const SolveConfig& cfg);

}  // namespace dcrr
