#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcrr/estimators.hpp"
#include "dcrr/transport.hpp"

namespace dcrr {

enum class ErrorLaw { Normal, ScaledT4, Cauchy };

struct ScenarioConfig {
    Eigen::Index n = 100;   // per-site size
    int M = 5;              // site count
    Eigen::Index p = 200;
    double rho = 0.5;
    std::vector<double> beta_star_values = {};  // empty: sqrt(3) on the first 3 coords
    int signal_count = 3;
    ErrorLaw error = ErrorLaw::Normal;
    int replicates = 20;
    std::uint64_t seed = 20260823;

    Eigen::VectorXd beta_star() const;
};

struct MetricRow {
    std::string method;
    double l1_err = 0.0, l2_err = 0.0;
    double fp = 0.0, fn = 0.0;
    double model_size = 0.0;
    std::int64_t comm_rounds = 0;
    double wall_time = 0.0;
    bool failed = false;
};

// Deterministic stream splitting: one independent 64-bit seed per
// (base seed, replicate, purpose) triple.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate, std::uint64_t purpose);

// Rows iid N(0, Sigma) with Sigma_ij = rho^|i-j| via the AR(1) recursion.
Eigen::MatrixXd gen_design(Eigen::Index n_total, Eigen::Index p, double rho, std::uint64_t seed);

Eigen::VectorXd gen_errors(ErrorLaw law, Eigen::Index n_total, std::uint64_t seed);

struct Scenario {
    std::vector<SiteShard> shards;
    DataBlock pooled;
    Eigen::VectorXd beta_star;
};

Scenario make_scenario(const ScenarioConfig& cfg, int replicate);

MetricRow metrics(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_star);

// Plug-in estimate of the sandwich variance ratio
// E[E{L_h'(e-e')|e}^2] / (E{L_h''(e-e')})^2 from residuals.
double tau2_diagnostic(const Eigen::VectorXd& residuals, const KernelSpec& spec);

// ----------------------------------------------------------------- harness

enum class MethodKind {
    CRR_LASSO,
    CRR_SCAD,
    DCRR_LASSO,
    DCRR_SCAD,
    DCRR_ORA,
    CRR_ORA,
    DC_CRR_LASSO,
    DC_CRR_SCAD,
};

struct MethodSpec {
    MethodKind kind;
    int T = 2;  // refinement stages where applicable

    std::string name() const;
    static std::optional<MethodSpec> parse(const std::string& label);
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    std::vector<MethodSpec> methods;
    FitConfig fit;  // kernel/solver/select defaults shared by every method
};

struct MethodSummary {
    std::string method;
    // mean and standard error (sd / sqrt(replicates)) per metric
    double l1_mean = 0, l1_se = 0;
    double l2_mean = 0, l2_se = 0;
    double fp_mean = 0, fp_se = 0;
    double fn_mean = 0, fn_se = 0;
    double ms_mean = 0, ms_se = 0;
    double comm_rounds_mean = 0;
    double wall_time_mean = 0;
    int failures = 0;
    int replicates = 0;
};

struct ExperimentResult {
    std::vector<MethodSummary> summaries;
    // per replicate, per method, in the order of ExperimentConfig::methods
    std::vector<std::vector<MetricRow>> rows;
    // selected support of each method per replicate (for oracle-event checks)
    std::vector<std::vector<std::vector<Eigen::Index>>> supports;
    std::vector<std::vector<Eigen::VectorXd>> betas;
};

FitResult run_method(const MethodSpec& method, const Scenario& scenario, const FitConfig& base);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string experiment_csv(const ExperimentConfig& cfg, const ExperimentResult& result);
std::string experiment_json(const ExperimentConfig& cfg, const ExperimentResult& result);

std::string error_law_name(ErrorLaw law);
std::optional<ErrorLaw> parse_error_law(const std::string& s);

}  // namespace dcrr
