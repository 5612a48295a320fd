#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dcrr/penalty.hpp"
#include "dcrr/prox_solver.hpp"

using namespace dcrr;

namespace {

// quadratic 0.5 (x-c)' A (x-c) with SPD A
SmoothOracle quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& c) {
    return SmoothOracle{
        [A, c](const Eigen::VectorXd& x) { return 0.5 * (x - c).dot(A * (x - c)); },
        [A, c](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * (x - c)); }, c.size()};
}

}  // namespace

TEST_CASE("unpenalized quadratic converges to the center") {
    Eigen::MatrixXd A(2, 2);
    A << 3.0, 0.5, 0.5, 1.0;
    Eigen::VectorXd c(2);
    c << -1.0, 2.0;
    SolveConfig cfg;
    const auto res = solve_weighted_l1(quadratic(A, c), Eigen::VectorXd::Zero(2),
                                       Eigen::VectorXd::Zero(2), cfg);
    CHECK(res.converged);
    CHECK((res.beta - c).lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("identity quadratic plus l1 is exact soft thresholding") {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd c(3);
    c << 2.0, -0.3, 0.9;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 0.5);
    SolveConfig cfg;
    const auto res = solve_weighted_l1(quadratic(A, c), w, Eigen::VectorXd::Zero(3), cfg);
    CHECK(res.converged);
    for (Eigen::Index j = 0; j < 3; ++j)
        CHECK(res.beta[j] == doctest::Approx(soft_threshold(c[j], 0.5)).epsilon(1e-6));
    CHECK(res.beta[1] == 0.0);  // thresholded coordinates are exact zeros
}

TEST_CASE("1-D nonsmooth instances against a grid-search oracle") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int t = 0; t < 10; ++t) {
        const double a = 0.5 + 2.0 * std::abs(U(rng));
        const double c = U(rng);
        const double lam = 0.1 + std::abs(U(rng));
        Eigen::MatrixXd A(1, 1);
        A << a;
        Eigen::VectorXd cv(1), w(1);
        cv << c;
        w << lam;
        const auto res =
            solve_weighted_l1(quadratic(A, cv), w, Eigen::VectorXd::Zero(1), SolveConfig{});
        double best_x = 0.0, best_v = 1e300;
        for (int i = -30000; i <= 30000; ++i) {
            const double x = i * 1e-4;
            const double v = 0.5 * a * (x - c) * (x - c) + lam * std::abs(x);
            if (v < best_v) {
                best_v = v;
                best_x = x;
            }
        }
        CHECK(std::abs(res.beta[0] - best_x) <= 1e-3);
    }
}

TEST_CASE("2-D correlated quadratic against a grid-search oracle") {
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 0.8, 0.8, 1.5;
    Eigen::VectorXd c(2), w(2);
    c << 1.2, -0.7;
    w << 0.4, 0.4;
    const auto res = solve_weighted_l1(quadratic(A, c), w, Eigen::VectorXd::Zero(2), SolveConfig{});
    double bx = 0, by = 0, bv = 1e300;
    for (int i = -300; i <= 300; ++i)
        for (int j = -300; j <= 300; ++j) {
            Eigen::VectorXd x(2);
            x << i * 0.005, j * 0.005;
            const double v = 0.5 * (x - c).dot(A * (x - c)) + 0.4 * x.lpNorm<1>();
            if (v < bv) {
                bv = v;
                bx = x[0];
                by = x[1];
            }
        }
    CHECK(std::abs(res.beta[0] - bx) <= 5e-3);
    CHECK(std::abs(res.beta[1] - by) <= 5e-3);
}

TEST_CASE("KKT certificate at the returned point") {
    // subgradient optimality: |grad_j| <= w_j on zeros, grad_j = -w_j sign(x_j) on actives
    std::mt19937 rng(23);
    std::normal_distribution<double> N(0.0, 1.0);
    const Eigen::Index p = 8;
    Eigen::MatrixXd B(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) B(i, j) = N(rng);
    Eigen::MatrixXd A = B * B.transpose() + Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd c(p);
    for (Eigen::Index i = 0; i < p; ++i) c[i] = N(rng);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(p, 0.8);
    SolveConfig cfg;
    const auto res = solve_weighted_l1(quadratic(A, c), w, Eigen::VectorXd::Zero(p), cfg);
    CHECK(res.converged);
    const Eigen::VectorXd g = A * (res.beta - c);
    const double scale = 1.0 + std::abs(res.trace.back());
    for (Eigen::Index j = 0; j < p; ++j) {
        if (res.beta[j] == 0.0)
            CHECK(std::abs(g[j]) <= w[j] + 10.0 * cfg.tol * scale);
        else
            CHECK(std::abs(g[j] + w[j] * (res.beta[j] > 0 ? 1.0 : -1.0)) <=
                  10.0 * cfg.tol * scale);
    }
}

TEST_CASE("objective trace is monotone after restarts settle") {
    Eigen::MatrixXd A(3, 3);
    A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    Eigen::VectorXd c(3);
    c << 1, -2, 0.5;
    const auto res = solve_weighted_l1(quadratic(A, c), Eigen::VectorXd::Constant(3, 0.3),
                                       Eigen::VectorXd::Zero(3), SolveConfig{});
    REQUIRE(res.trace.size() >= 2);
    // adaptive restart: accepted iterates never increase the composite objective
    for (std::size_t k = 1; k < res.trace.size(); ++k)
        CHECK(res.trace[k] <= res.trace[k - 1] + 1e-12);
}

TEST_CASE("max_iter exhaustion reports non-convergence") {
    Eigen::MatrixXd A(2, 2);
    A << 100.0, 0.0, 0.0, 0.01;  // nasty conditioning
    Eigen::VectorXd c(2);
    c << 5.0, -5.0;
    SolveConfig cfg;
    cfg.max_iter = 2;
    cfg.tol = 1e-14;
    const auto res = solve_weighted_l1(quadratic(A, c), Eigen::VectorXd::Zero(2),
                                       Eigen::VectorXd::Zero(2), cfg);
    CHECK_FALSE(res.converged);
}

TEST_CASE("restricted solve pins off-support coordinates to zero") {
    Eigen::MatrixXd A(3, 3);
    A << 2, 0.3, 0.1, 0.3, 2, 0.2, 0.1, 0.2, 2;
    Eigen::VectorXd c(3);
    c << 1.0, -1.0, 2.0;
    const auto res =
        solve_restricted(quadratic(A, c), {0, 2}, Eigen::VectorXd::Zero(3), SolveConfig{});
    CHECK(res.converged);
    CHECK(res.beta[1] == 0.0);
    // optimality on the support: masked gradient vanishes
    const Eigen::VectorXd g = A * (res.beta - c);
    CHECK(std::abs(g[0]) <= 1e-5);
    CHECK(std::abs(g[2]) <= 1e-5);
}
