#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dcrr/simlab.hpp"

using namespace dcrr;

TEST_CASE("derive_seed splits streams") {
    const auto a = derive_seed(1, 0, 1);
    CHECK(derive_seed(1, 0, 1) == a);  // deterministic
    CHECK(derive_seed(1, 0, 2) != a);
    CHECK(derive_seed(1, 1, 1) != a);
    CHECK(derive_seed(2, 0, 1) != a);
}

TEST_CASE("beta_star layout") {
    ScenarioConfig sc;
    sc.p = 6;
    const Eigen::VectorXd b = sc.beta_star();
    CHECK(b[0] == doctest::Approx(std::sqrt(3.0)));
    CHECK(b[2] == doctest::Approx(std::sqrt(3.0)));
    CHECK(b[3] == 0.0);
    sc.beta_star_values = {1.0, -2.0};
    const Eigen::VectorXd c = sc.beta_star();
    CHECK(c[0] == 1.0);
    CHECK(c[1] == -2.0);
    CHECK(c[2] == 0.0);
}

TEST_CASE("AR(1) design: unit variance, lag-one correlation near rho") {
    const Eigen::Index N = 20000, p = 6;
    const Eigen::MatrixXd X = gen_design(N, p, 0.5, 99);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (X.col(j).array() - X.col(j).mean()).square().mean();
        CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    }
    for (Eigen::Index j = 0; j + 1 < p; ++j) {
        const double corr = (X.col(j).array() * X.col(j + 1).array()).mean();
        CHECK(std::abs(corr - 0.5) <= 0.02);
    }
    // lag two decays like rho^2
    const double corr2 = (X.col(0).array() * X.col(2).array()).mean();
    CHECK(std::abs(corr2 - 0.25) <= 0.03);
}

TEST_CASE("error laws have the advertised shape") {
    const Eigen::Index N = 40000;
    const Eigen::VectorXd en = gen_errors(ErrorLaw::Normal, N, 3);
    CHECK(en.mean() == doctest::Approx(0.0).epsilon(0.05));
    CHECK(en.array().square().mean() == doctest::Approx(1.0).epsilon(0.05));

    const Eigen::VectorXd et = gen_errors(ErrorLaw::ScaledT4, N, 4);
    CHECK(et.array().square().mean() == doctest::Approx(1.0).epsilon(0.1));
    // heavier fourth moment than the normal (t4/sqrt(2) has infinite kurtosis
    // in theory; finite samples still show clear excess)
    CHECK(et.array().pow(4).mean() > en.array().pow(4).mean());

    // Cauchy: median-based half-width near 1, wild extremes present
    Eigen::VectorXd ec = gen_errors(ErrorLaw::Cauchy, N, 5);
    std::vector<double> abs_ec(ec.data(), ec.data() + N);
    for (auto& v : abs_ec) v = std::abs(v);
    std::nth_element(abs_ec.begin(), abs_ec.begin() + N / 2, abs_ec.end());
    CHECK(abs_ec[N / 2] == doctest::Approx(1.0).epsilon(0.1));  // median |C| = tan(pi/4) = 1
    CHECK(ec.cwiseAbs().maxCoeff() > 100.0);
}

TEST_CASE("make_scenario shards contiguously and reproducibly") {
    ScenarioConfig sc;
    sc.n = 10;
    sc.M = 3;
    sc.p = 4;
    const Scenario a = make_scenario(sc, 2);
    const Scenario b = make_scenario(sc, 2);
    REQUIRE(a.shards.size() == 3);
    CHECK(a.pooled.n() == 30);
    CHECK((a.pooled.X - b.pooled.X).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.shards[1].data.X - a.pooled.X.middleRows(10, 10)).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.shards[2].data.y - a.pooled.y.segment(20, 10)).lpNorm<Eigen::Infinity>() == 0.0);
    // y = X beta* + eps holds
    const Scenario c = make_scenario(sc, 3);
    CHECK((c.pooled.X - a.pooled.X).lpNorm<Eigen::Infinity>() != 0.0);  // replicates differ
}

TEST_CASE("metrics worked example") {
    Eigen::VectorXd star(5);
    star << std::sqrt(3.0), std::sqrt(3.0), 0.0, 0.0, 0.0;
    Eigen::VectorXd hat(5);
    hat << 0.0, std::sqrt(3.0), 1.0, 0.0, 1e-9;
    const MetricRow row = metrics(hat, star);
    CHECK(row.l2_err == doctest::Approx(std::sqrt(3.0 + 1.0)));
    CHECK(row.l1_err == doctest::Approx(std::sqrt(3.0) + 1.0));
    CHECK(row.fp == 1.0);   // coordinate 2
    CHECK(row.fn == 1.0);   // coordinate 0
    CHECK(row.model_size == 2.0);
    CHECK_THROWS_AS(metrics(hat, star.head(3)), std::invalid_argument);
}

TEST_CASE("tau2 diagnostic: hand-computed n=3 instance") {
    const KernelSpec spec{KernelKind::Gaussian, 1.0};
    Eigen::VectorXd r(3);
    r << -1.0, 0.0, 1.5;
    double num = 0.0, d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            inner += conv_loss_d1(spec, r[i] - r[j]);
            d2 += conv_loss_d2(spec, r[i] - r[j]);
        }
        num += (inner / 2.0) * (inner / 2.0);
    }
    num /= 3.0;
    const double denom = d2 / 6.0;
    CHECK(tau2_diagnostic(r, spec) == doctest::Approx(num / (denom * denom)).epsilon(1e-12));
    CHECK_THROWS_AS(tau2_diagnostic(r.head(2), spec), std::invalid_argument);
}

TEST_CASE("method labels round trip") {
    for (const char* label : {"CRR-LASSO", "CRR-SCAD", "DCRR-LASSO", "DCRR-SCAD(2)",
                              "DCRR-SCAD(6)", "DCRR-ORA(6)", "CRR-ORA", "DC-CRR-LASSO",
                              "DC-CRR-SCAD"}) {
        const auto spec = MethodSpec::parse(label);
        REQUIRE(spec.has_value());
        CHECK(spec->name() == label);
    }
    CHECK_FALSE(MethodSpec::parse("DCRR-RIDGE").has_value());
    CHECK_FALSE(MethodSpec::parse("DCRR-SCAD(x)").has_value());
}

TEST_CASE("tiny experiment: determinism and summary bookkeeping") {
    ExperimentConfig cfg;
    cfg.scenario.n = 25;
    cfg.scenario.M = 2;
    cfg.scenario.p = 8;
    cfg.scenario.signal_count = 2;
    cfg.scenario.replicates = 3;
    cfg.scenario.seed = 5150;
    cfg.methods = {MethodSpec{MethodKind::DCRR_SCAD, 2}, MethodSpec{MethodKind::DC_CRR_SCAD, 2}};
    cfg.fit.k1 = 2;
    cfg.fit.select.grid_size = 6;

    const ExperimentResult a = run_experiment(cfg);
    REQUIRE(a.summaries.size() == 2);
    REQUIRE(a.rows.size() == 3);
    CHECK(a.summaries[0].replicates == 3);
    CHECK(a.summaries[0].failures == 0);
    CHECK(a.summaries[0].l2_mean > 0.0);
    CHECK(a.summaries[0].comm_rounds_mean > 0.0);
    CHECK(a.summaries[1].comm_rounds_mean == 0.0);  // divide and conquer never talks

    const ExperimentResult b = run_experiment(cfg);
    CHECK(experiment_csv(cfg, a) == experiment_csv(cfg, b));  // identical bytes, same seed

    // manual SE spot check
    const auto& s = a.summaries[0];
    double mean = 0.0;
    for (int r = 0; r < 3; ++r) mean += a.rows[r][0].l2_err;
    mean /= 3.0;
    CHECK(s.l2_mean == doctest::Approx(mean).epsilon(1e-12));
}
