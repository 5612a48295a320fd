#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "dcrr/transport.hpp"

namespace dcrr {

struct SelectConfig {
    int grid_size = 50;
    double grid_min_ratio = 0.01;
    double C_N = -1.0;  // <= 0: use log(log N)
    int K_N = -1;       // <= 0: use min(n, 2*sqrt(p), 50)

    double resolved_C_N(double N_total, std::size_t num_sites = 1) const;
    int resolved_K_N(Eigen::Index n, Eigen::Index p) const;
};

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta);

// Log-spaced grid from lambda_max down to grid_min_ratio * lambda_max.
// Degenerate lambda_max (zero gradient at the origin) yields a single point.
std::vector<double> lambda_grid(double lambda_max, const SelectConfig& cfg);

// One LossRequest round; returns log(weighted mean local loss)
// + |supp| * C_N * log(p) / n_master.
double dhbic_score(Cluster& cluster, const Eigen::VectorXd& beta_hat, double C_N);

struct Selection {
    double lambda = 0.0;
    Eigen::VectorXd beta;
    bool over_cap_warning = false;  // every grid point exceeded K_N
};

// Walks the grid high -> low, fitting via `fit_at` (which is expected to warm
// start internally), scores every fit with DHBIC, and returns the admissible
// minimizer. Ties break toward smaller support, then larger lambda.
Selection select_lambda(Cluster& cluster, const std::vector<double>& grid,
                        const std::function<Eigen::VectorXd(double)>& fit_at,
                        const SelectConfig& cfg);

}  // namespace dcrr
