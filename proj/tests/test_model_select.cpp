#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dcrr/estimators.hpp"
#include "dcrr/model_select.hpp"

using namespace dcrr;

namespace {

std::vector<SiteShard> toy_shards(int M, Eigen::Index n, Eigen::Index p, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<SiteShard> shards;
    for (int m = 0; m < M; ++m) {
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) X(i, j) = N(rng);
            y[i] = X(i, 0) * 2.0 + N(rng);
        }
        shards.push_back({static_cast<std::uint16_t>(m), DataBlock(X, y), 0.0});
    }
    return shards;
}

}  // namespace

TEST_CASE("lambda grid is log spaced, descending, with the right endpoints") {
    SelectConfig cfg;
    cfg.grid_size = 10;
    cfg.grid_min_ratio = 0.01;
    const auto grid = lambda_grid(5.0, cfg);
    REQUIRE(grid.size() == 10);
    CHECK(grid.front() == doctest::Approx(5.0));
    CHECK(grid.back() == doctest::Approx(0.05));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        CHECK(grid[i] < grid[i - 1]);
        // constant ratio between neighbors
        CHECK(grid[i] / grid[i - 1] ==
              doctest::Approx(grid[1] / grid[0]).epsilon(1e-12));
    }
    CHECK(lambda_grid(0.0, cfg).size() == 1);
    cfg.grid_size = 1;
    CHECK_THROWS_AS(lambda_grid(1.0, cfg), std::invalid_argument);
}

TEST_CASE("resolved constants") {
    SelectConfig cfg;
    CHECK(cfg.resolved_C_N(1000.0) == doctest::Approx(std::log(std::log(1000.0))));
    CHECK(cfg.resolved_C_N(1000.0, 5) == doctest::Approx(0.25 * std::log(std::log(1000.0))));
    CHECK(cfg.resolved_K_N(100, 200) == std::min(100, std::min((int)(2 * std::sqrt(200.0)), 50)));
    cfg.C_N = 2.5;
    cfg.K_N = 7;
    CHECK(cfg.resolved_C_N(1000.0) == doctest::Approx(2.5));
    CHECK(cfg.resolved_K_N(100, 200) == 7);
}

TEST_CASE("support_of respects the threshold") {
    Eigen::VectorXd b(4);
    b << 1e-9, -1e-7, 0.0, 2.0;
    const auto s = support_of(b);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == 1);
    CHECK(s[1] == 3);
}

TEST_CASE("dhbic: loss term plus support penalty, one loss round") {
    auto shards = toy_shards(2, 20, 5, 8);
    InProcessCluster cluster(shards, KernelSpec{});
    const double C_N = 1.3;

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    const double s0 = dhbic_score(cluster, zero, C_N);
    CHECK(cluster.stats().rounds == 1);
    CHECK(cluster.stats().loss_rounds == 1);

    // same coefficients with a padded support pay exactly the penalty increment
    Eigen::VectorXd near_zero = zero;
    near_zero[4] = 1e-6;  // above threshold, negligible loss change
    const double s1 = dhbic_score(cluster, near_zero, C_N);
    const double n_master = static_cast<double>(cluster.master_block().n());
    CHECK(s1 - s0 == doctest::Approx(C_N * std::log(5.0) / n_master).epsilon(1e-4));
}

TEST_CASE("dhbic equals the centralized HBIC when M=1") {
    auto shards = toy_shards(1, 15, 3, 12);
    InProcessCluster cluster(shards, KernelSpec{});
    Eigen::VectorXd beta(3);
    beta << 1.0, 0.0, -0.2;
    const double score = dhbic_score(cluster, beta, 2.0);
    const double direct = std::log(crr_loss(shards[0].data, beta, KernelSpec{})) +
                          2.0 * 2.0 * std::log(3.0) / 15.0;
    CHECK(score == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("select_lambda scores the whole grid and picks the DHBIC minimizer") {
    auto shards = toy_shards(2, 25, 4, 21);
    InProcessCluster cluster(shards, KernelSpec{});
    SelectConfig cfg;
    cfg.grid_size = 6;

    // synthetic path: high lambda kills everything, low lambda overfits noise
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(4);
    truth[0] = 2.0;
    auto fit_at = [&](double lam) -> Eigen::VectorXd {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
        if (lam < 1.0) b[0] = 2.0;
        if (lam < 0.05) b.tail(3).setConstant(0.3);  // spurious
        return b;
    };
    const auto before = cluster.stats().rounds;
    const auto sel = select_lambda(cluster, lambda_grid(2.0, cfg), fit_at, cfg);
    CHECK(cluster.stats().rounds - before == 6);  // one loss round per grid point
    CHECK_FALSE(sel.over_cap_warning);
    CHECK(support_of(sel.beta) == std::vector<Eigen::Index>{0});
}

TEST_CASE("select_lambda cap fallback warns and keeps the sparsest end") {
    auto shards = toy_shards(1, 10, 6, 30);
    InProcessCluster cluster(shards, KernelSpec{});
    SelectConfig cfg;
    cfg.grid_size = 3;
    cfg.K_N = 2;
    auto fit_at = [&](double) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(6, 0.5);  // support 6 > K_N everywhere
    };
    const auto sel = select_lambda(cluster, lambda_grid(1.0, cfg), fit_at, cfg);
    CHECK(sel.over_cap_warning);
    CHECK(sel.lambda == doctest::Approx(1.0));
}
