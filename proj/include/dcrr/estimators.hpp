#pragma once

#include <Eigen/Core>
#include <vector>

#include "dcrr/model_select.hpp"
#include "dcrr/penalty.hpp"
#include "dcrr/prox_solver.hpp"
#include "dcrr/transport.hpp"

namespace dcrr {

struct FitConfig {
    KernelSpec kernel;
    PenaltySpec penalty{PenaltyKind::SCAD, 0.0};  // kind/shape for the refinement stages
    int k1 = 8;       // l1-stage gradient rounds
    int T = 2;        // total stages (1 = l1 only)
    SolveConfig solver;
    SelectConfig select;
    double fixed_lambda = -1.0;  // >= 0 skips DHBIC selection everywhere
};

struct FitResult {
    Eigen::VectorXd beta;
    std::vector<Eigen::Index> support;
    CommStats comm;
    std::vector<double> objective_trace;      // composite objective after each round
    std::vector<Eigen::VectorXd> stage_betas;  // after stage 1 and each refinement
    bool converged = true;
    bool select_warning = false;
};

// l1-penalized CRR on the master shard alone, lambda by the local HBIC path.
// No communication.
Eigen::VectorXd fit_local_init(const DataBlock& master, const FitConfig& cfg);

// k1 rounds of the l1 stage starting from beta0; lambda selected by DHBIC at
// round 1 and held fixed afterwards.
Eigen::VectorXd dcrr_stage1(Cluster& cluster, const FitConfig& cfg, const Eigen::VectorXd& beta0);

// One folded-concave refinement: a gradient round at beta_prev, then a
// weighted-l1 solve with LLA weights from the penalty derivative.
Eigen::VectorXd dcrr_refine(Cluster& cluster, const FitConfig& cfg,
                            const Eigen::VectorXd& beta_prev);

// Full two-stage pipeline: local init, k1 l1 rounds, T-1 refinements.
FitResult fit_dcrr(Cluster& cluster, const FitConfig& cfg);

// Same machinery over the pooled sample as a single-site cluster.
FitResult fit_crr_centralized(const DataBlock& all_data, const FitConfig& cfg);

// One-shot divide and conquer: independent local fits, n_m-weighted average.
FitResult fit_dc_average(const std::vector<SiteShard>& shards, const FitConfig& cfg);

// Local penalized fit on one block (the per-site unit of fit_dc_average).
FitResult fit_penalized_local(const DataBlock& block, const FitConfig& cfg);

// Oracle estimators (true support known; simulation only).
FitResult fit_oracle_centralized(const DataBlock& all_data,
                                 const std::vector<Eigen::Index>& true_support,
                                 const FitConfig& cfg);
FitResult fit_oracle_distributed(Cluster& cluster, const std::vector<Eigen::Index>& true_support,
                                 const FitConfig& cfg);

// Curvature bound for the CRR loss on a block: (2 kappa_u / h) times the
// largest eigenvalue of the pairwise design Gram. Used as the solver's
// initial step estimate.
double crr_lipschitz_estimate(const DataBlock& block, const KernelSpec& kernel);

}  // namespace dcrr
