#include "dcrr/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dcrr/penalty.hpp"

namespace dcrr {

double SelectConfig::resolved_C_N(double N_total, std::size_t num_sites) const {
    if (C_N > 0.0) return C_N;
    const double base = std::log(std::log(std::max(N_total, 8.0)));
    // Single-site selection is the classical in-sample HBIC. The distributed
    // criterion averages losses over sites, which is out-of-sample for all
    // but the master shard, so spurious coordinates already raise the score;
    // a small constant (still of order log log N) is enough there, and the
    // full constant would reject real signal under heavy-tailed errors where
    // the attainable log-loss drop of the true model is modest.
    return num_sites > 1 ? 0.25 * base : base;
}

int SelectConfig::resolved_K_N(Eigen::Index n, Eigen::Index p) const {
    if (K_N > 0) return K_N;
    const double cap = std::min({static_cast<double>(n),
                                 2.0 * std::sqrt(static_cast<double>(p)), 50.0});
    return std::max(1, static_cast<int>(cap));
}

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta) {
    std::vector<Eigen::Index> supp;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (std::abs(beta[j]) > kSupportThreshold) supp.push_back(j);
    return supp;
}

std::vector<double> lambda_grid(double lambda_max, const SelectConfig& cfg) {
    if (cfg.grid_size < 2) throw std::invalid_argument("lambda_grid: grid_size must be >= 2");
    if (!(lambda_max > 0.0)) return {0.0};  // degenerate data
    std::vector<double> grid(cfg.grid_size);
    const double log_max = std::log(lambda_max);
    const double log_min = std::log(lambda_max * cfg.grid_min_ratio);
    for (int i = 0; i < cfg.grid_size; ++i)
        grid[i] = std::exp(log_max + (log_min - log_max) * i / (cfg.grid_size - 1));
    return grid;
}

double dhbic_score(Cluster& cluster, const Eigen::VectorXd& beta_hat, double C_N) {
    const auto replies = cluster.round(beta_hat, Purpose::LossRequest);
    double loss_sum = 0.0, w_sum = 0.0;
    for (const auto& r : replies) {
        const double w = static_cast<double>(r.n_local);
        loss_sum += w * r.loss.value();
        w_sum += w;
    }
    const double mean_loss = loss_sum / w_sum;
    if (!(mean_loss > 0.0))
        throw std::runtime_error("dhbic_score: non-positive mean local loss");
    const double n_master = static_cast<double>(cluster.master_block().n());
    const double p = static_cast<double>(cluster.master_block().p());
    const double size = static_cast<double>(support_of(beta_hat).size());
    return std::log(mean_loss) + size * C_N * std::log(p) / n_master;
}

Selection select_lambda(Cluster& cluster, const std::vector<double>& grid,
                        const std::function<Eigen::VectorXd(double)>& fit_at,
                        const SelectConfig& cfg) {
    if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");

    double N_total = 0.0;
    const std::size_t num_sites = cluster.site_sizes().size();
    for (const auto& [id, n] : cluster.site_sizes()) N_total += static_cast<double>(n);
    if (N_total <= 0.0) N_total = static_cast<double>(cluster.master_block().n());
    const double C_N = cfg.resolved_C_N(N_total, num_sites);
    const int K_N = cfg.resolved_K_N(cluster.master_block().n(), cluster.master_block().p());

    Selection best;
    bool have_best = false;
    std::size_t best_size = 0;
    double best_score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd largest_fit;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lam = grid[i];
        Eigen::VectorXd beta = fit_at(lam);
        const std::size_t size = support_of(beta).size();
        if (i == 0) largest_fit = beta;
        const double score = dhbic_score(cluster, beta, C_N);
        if (size > static_cast<std::size_t>(K_N)) continue;
        const bool better =
            !have_best || score < best_score ||
            (score == best_score && (size < best_size || (size == best_size && lam > best.lambda)));
        if (better) {
            best = {lam, std::move(beta), false};
            best_score = score;
            best_size = size;
            have_best = true;
        }
    }
    if (!have_best) {
        // every candidate blew past the support cap; keep the sparsest end
        best = {grid.front(), std::move(largest_fit), true};
    }
    return best;
}

}  // namespace dcrr
