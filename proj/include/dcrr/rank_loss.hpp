#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dcrr/smoothing.hpp"

namespace dcrr {

// One block of (X, y) data. Immutable after construction; safe to share
// across threads.
struct DataBlock {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;

    DataBlock() = default;
    DataBlock(Eigen::MatrixXd X_, Eigen::VectorXd y_) : X(std::move(X_)), y(std::move(y_)) {
        if (X.rows() != y.size())
            throw std::invalid_argument("DataBlock: X row count must equal y length");
    }

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }
};

// Gradient correction aggregated from the local sites:
// grad of the master loss at the anchor minus the weighted mean of all
// site gradients at the anchor.
struct CorrectionVector {
    Eigen::VectorXd g;
    int origin_round = 0;
};

// Pairwise U-statistic CRR loss over all ordered pairs of the block:
// (1/(n(n-1))) sum_{i != j} L_h(y_i - y_j - (x_i - x_j)' beta).
double crr_loss(const DataBlock& block, const Eigen::VectorXd& beta, const KernelSpec& spec);

// Analytic gradient of crr_loss. Uses the regrouping
//   grad = -(2/(n(n-1))) X' s,   s_i = sum_{j != i} L_h'(r_i - r_j),
// which is O(n^2 + np) instead of the direct O(n^2 p) double loop.
Eigen::VectorXd crr_grad(const DataBlock& block, const Eigen::VectorXd& beta,
                         const KernelSpec& spec);

// Loss and gradient from one residual pass; used by the solver's
// backtracking line search.
struct LossGrad {
    double loss;
    Eigen::VectorXd grad;
};
LossGrad crr_loss_grad(const DataBlock& block, const Eigen::VectorXd& beta,
                       const KernelSpec& spec);

// Surrogate objective: master CRR loss minus <beta, correction>.
double surrogate_loss(const DataBlock& master, const Eigen::VectorXd& beta,
                      const CorrectionVector& correction, const KernelSpec& spec);

Eigen::VectorXd surrogate_grad(const DataBlock& master, const Eigen::VectorXd& beta,
                               const CorrectionVector& correction, const KernelSpec& spec);

// master_grad - (weighted mean of site gradients). With equal weights this is
// the plain average.
CorrectionVector build_correction(const Eigen::VectorXd& master_grad,
                                  const std::vector<std::pair<Eigen::VectorXd, double>>& site_grads,
                                  int origin_round = 0);

}  // namespace dcrr
