#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dcrr/estimators.hpp"
#include "dcrr/simlab.hpp"

using namespace dcrr;

namespace {

// small, well-separated scenario so that fits are fast and recovery is easy
Scenario small_scenario(int M, Eigen::Index n, Eigen::Index p, unsigned rep = 0) {
    ScenarioConfig sc;
    sc.n = n;
    sc.M = M;
    sc.p = p;
    sc.signal_count = 2;
    sc.error = ErrorLaw::Normal;
    sc.seed = 777;
    return make_scenario(sc, static_cast<int>(rep));
}

FitConfig fast_config() {
    FitConfig cfg;
    cfg.k1 = 2;
    cfg.T = 2;
    cfg.select.grid_size = 8;
    return cfg;
}

}  // namespace

TEST_CASE("lipschitz estimate dominates observed curvature") {
    const Scenario sc = small_scenario(1, 40, 5);
    const KernelSpec kernel{KernelKind::Epanechnikov, 1.0};
    const double L = crr_lipschitz_estimate(sc.pooled, kernel);
    CHECK(L > 0.0);
    // gradient differences along random directions never exceed L * step
    std::mt19937 rng(4);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(5, [&](Eigen::Index) { return N(rng); });
        Eigen::VectorXd b = a + 0.1 * Eigen::VectorXd::NullaryExpr(
                                      5, [&](Eigen::Index) { return N(rng); });
        const double lhs = (crr_grad(sc.pooled, a, kernel) - crr_grad(sc.pooled, b, kernel)).norm();
        CHECK(lhs <= L * (a - b).norm() * (1.0 + 1e-9));
    }
}

TEST_CASE("M=1 DCRR is bit-identical to centralized CRR") {
    const Scenario sc = small_scenario(1, 50, 8);
    FitConfig cfg = fast_config();

    auto cluster = make_inprocess_cluster({SiteShard{0, sc.pooled, 0.0}}, cfg.kernel);
    const FitResult a = fit_dcrr(*cluster, cfg);
    const FitResult b = fit_crr_centralized(sc.pooled, cfg);
    REQUIRE(a.beta.size() == b.beta.size());
    for (Eigen::Index j = 0; j < a.beta.size(); ++j) CHECK(a.beta[j] == b.beta[j]);
    CHECK(b.comm.rounds == 0);
    CHECK(b.comm.bytes_down == 0);
}

TEST_CASE("M=1 dc average equals the single local fit") {
    const Scenario sc = small_scenario(1, 40, 6);
    FitConfig cfg = fast_config();
    const FitResult dc = fit_dc_average({SiteShard{0, sc.pooled, 0.0}}, cfg);
    const FitResult local = fit_penalized_local(sc.pooled, cfg);
    for (Eigen::Index j = 0; j < dc.beta.size(); ++j)
        CHECK(dc.beta[j] == doctest::Approx(local.beta[j]).epsilon(1e-15));
}

TEST_CASE("dcrr recovers a strong sparse signal") {
    const Scenario sc = small_scenario(3, 60, 10);
    FitConfig cfg = fast_config();
    auto cluster = make_inprocess_cluster(sc.shards, cfg.kernel);
    const FitResult fit = fit_dcrr(*cluster, cfg);
    CHECK(fit.converged);
    CHECK(fit.support == support_of(sc.beta_star));
    CHECK((fit.beta - sc.beta_star).norm() <= 0.5);
}

TEST_CASE("communication accounting: k1 + (T-1) gradient rounds, grid_size * T loss rounds") {
    const Scenario sc = small_scenario(3, 30, 6);
    FitConfig cfg = fast_config();
    cfg.k1 = 4;
    cfg.T = 3;
    cfg.select.grid_size = 5;
    auto cluster = make_inprocess_cluster(sc.shards, cfg.kernel);
    const FitResult fit = fit_dcrr(*cluster, cfg);
    CHECK(fit.comm.gradient_rounds == cfg.k1 + (cfg.T - 1));
    CHECK(fit.comm.loss_rounds == cfg.select.grid_size * cfg.T);
    CHECK(fit.comm.rounds == fit.comm.gradient_rounds + fit.comm.loss_rounds);
    const std::int64_t M = 3;
    CHECK(fit.comm.bytes_down ==
          fit.comm.rounds * M * static_cast<std::int64_t>(broadcast_wire_size(6)));
    CHECK(fit.comm.bytes_up ==
          fit.comm.gradient_rounds * M *
                  static_cast<std::int64_t>(gradient_wire_size(6, Purpose::GradientRequest)) +
              fit.comm.loss_rounds * M *
                  static_cast<std::int64_t>(gradient_wire_size(6, Purpose::LossRequest)));
}

TEST_CASE("fixed lambda skips selection and its loss rounds") {
    const Scenario sc = small_scenario(2, 30, 5);
    FitConfig cfg = fast_config();
    cfg.fixed_lambda = 0.2;
    auto cluster = make_inprocess_cluster(sc.shards, cfg.kernel);
    const FitResult fit = fit_dcrr(*cluster, cfg);
    CHECK(fit.comm.loss_rounds == 0);
    CHECK(fit.comm.gradient_rounds == cfg.k1 + (cfg.T - 1));
}

TEST_CASE("oracle estimators: restricted stationarity and true support") {
    const Scenario sc = small_scenario(3, 50, 8);
    FitConfig cfg = fast_config();
    const auto truth = support_of(sc.beta_star);

    const FitResult cen = fit_oracle_centralized(sc.pooled, truth, cfg);
    CHECK(cen.converged);
    for (Eigen::Index j = 0; j < 8; ++j)
        if (std::find(truth.begin(), truth.end(), j) == truth.end()) CHECK(cen.beta[j] == 0.0);
    // first-order optimality on the support
    const Eigen::VectorXd g = crr_grad(sc.pooled, cen.beta, cfg.kernel);
    for (Eigen::Index j : truth) CHECK(std::abs(g[j]) <= 1e-6);

    auto cluster = make_inprocess_cluster(sc.shards, cfg.kernel);
    const FitResult dist = fit_oracle_distributed(*cluster, truth, cfg);
    CHECK(dist.converged);
    // shares the practical first stage, then T-1 restricted corrected rounds
    CHECK(dist.comm.gradient_rounds == cfg.k1 + (cfg.T - 1));
    CHECK((dist.beta - cen.beta).norm() <= 0.2);
}

TEST_CASE("dc average is the weighted mean of local fits") {
    const Scenario sc = small_scenario(2, 40, 5);
    FitConfig cfg = fast_config();
    const FitResult dc = fit_dc_average(sc.shards, cfg);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(5);
    double wsum = 0.0;
    for (const auto& s : sc.shards) {
        const double w = static_cast<double>(s.data.n());
        manual += w * fit_penalized_local(s.data, cfg).beta;
        wsum += w;
    }
    manual /= wsum;
    CHECK((dc.beta - manual).lpNorm<Eigen::Infinity>() <= 1e-15);
    CHECK(dc.comm.rounds == 0);
}

TEST_CASE("config validation") {
    const Scenario sc = small_scenario(1, 20, 4);
    FitConfig cfg = fast_config();
    cfg.k1 = 0;
    auto cluster = make_inprocess_cluster(sc.shards, cfg.kernel);
    CHECK_THROWS_AS(fit_dcrr(*cluster, cfg), std::invalid_argument);
    cfg.k1 = 1;
    cfg.T = 0;
    CHECK_THROWS_AS(fit_dcrr(*cluster, cfg), std::invalid_argument);
}
