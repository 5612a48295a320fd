#include "dcrr/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace dcrr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate, std::uint64_t purpose) {
    return splitmix64(splitmix64(base ^ splitmix64(replicate)) ^ splitmix64(purpose ^ 0xabcdef12ULL));
}

Eigen::VectorXd ScenarioConfig::beta_star() const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    if (!beta_star_values.empty()) {
        if (static_cast<Eigen::Index>(beta_star_values.size()) > p)
            throw std::invalid_argument("beta_star_values longer than p");
        for (std::size_t j = 0; j < beta_star_values.size(); ++j)
            b[static_cast<Eigen::Index>(j)] = beta_star_values[j];
    } else {
        const double v = std::sqrt(3.0);
        for (int j = 0; j < signal_count && j < p; ++j) b[j] = v;
    }
    return b;
}

Eigen::MatrixXd gen_design(Eigen::Index n_total, Eigen::Index p, double rho, std::uint64_t seed) {
    if (std::abs(rho) >= 1.0) throw std::invalid_argument("gen_design: |rho| must be < 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(n_total, p);
    const double scale = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index i = 0; i < n_total; ++i) {
        double prev = normal(rng);
        X(i, 0) = prev;
        for (Eigen::Index j = 1; j < p; ++j) {
            prev = rho * prev + scale * normal(rng);
            X(i, j) = prev;
        }
    }
    return X;
}

Eigen::VectorXd gen_errors(ErrorLaw law, Eigen::Index n_total, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::VectorXd e(n_total);
    switch (law) {
        case ErrorLaw::Normal: {
            std::normal_distribution<double> d(0.0, 1.0);
            for (Eigen::Index i = 0; i < n_total; ++i) e[i] = d(rng);
            break;
        }
        case ErrorLaw::ScaledT4: {
            // Var(t4) = 2, so t4/sqrt(2) has unit variance; the sqrt(2)*t(4)
            // convention refers to the unit-variance scaling of the t(4) law.
            std::student_t_distribution<double> d(4.0);
            const double scale = 1.0 / std::sqrt(2.0);
            for (Eigen::Index i = 0; i < n_total; ++i) e[i] = scale * d(rng);
            break;
        }
        case ErrorLaw::Cauchy: {
            std::cauchy_distribution<double> d(0.0, 1.0);
            for (Eigen::Index i = 0; i < n_total; ++i) e[i] = d(rng);
            break;
        }
    }
    return e;
}

Scenario make_scenario(const ScenarioConfig& cfg, int replicate) {
    const Eigen::Index N = cfg.n * cfg.M;
    const Eigen::VectorXd beta = cfg.beta_star();
    Eigen::MatrixXd X = gen_design(N, cfg.p, cfg.rho,
                                   derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate), 1));
    Eigen::VectorXd eps =
        gen_errors(cfg.error, N, derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate), 2));
    Eigen::VectorXd y = X * beta + eps;

    Scenario sc;
    sc.beta_star = beta;
    sc.pooled = DataBlock(X, y);
    sc.shards.reserve(static_cast<std::size_t>(cfg.M));
    for (int m = 0; m < cfg.M; ++m) {
        const Eigen::Index lo = static_cast<Eigen::Index>(m) * cfg.n;
        sc.shards.push_back(SiteShard{static_cast<std::uint16_t>(m),
                                      DataBlock(X.middleRows(lo, cfg.n), y.segment(lo, cfg.n)),
                                      static_cast<double>(cfg.n)});
    }
    return sc;
}

MetricRow metrics(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_star) {
    if (beta_hat.size() != beta_star.size())
        throw std::invalid_argument("metrics: length mismatch");
    MetricRow row;
    row.l1_err = (beta_hat - beta_star).lpNorm<1>();
    row.l2_err = (beta_hat - beta_star).norm();
    for (Eigen::Index j = 0; j < beta_hat.size(); ++j) {
        const bool sel = std::abs(beta_hat[j]) > kSupportThreshold;
        const bool truth = std::abs(beta_star[j]) > kSupportThreshold;
        if (sel && !truth) row.fp += 1.0;
        if (!sel && truth) row.fn += 1.0;
        if (sel) row.model_size += 1.0;
    }
    return row;
}

double tau2_diagnostic(const Eigen::VectorXd& residuals, const KernelSpec& spec) {
    const Eigen::Index n = residuals.size();
    if (n < 3) throw std::invalid_argument("tau2_diagnostic: need at least 3 residuals");
    double numerator = 0.0;
    double d2_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            inner += conv_loss_d1(spec, residuals[i] - residuals[j]);
            d2_sum += conv_loss_d2(spec, residuals[i] - residuals[j]);
        }
        inner /= static_cast<double>(n - 1);
        numerator += inner * inner;
    }
    numerator /= static_cast<double>(n);
    const double denom_mean = d2_sum / (static_cast<double>(n) * static_cast<double>(n - 1));
    if (!(denom_mean > 0.0))
        throw std::runtime_error("tau2_diagnostic: degenerate residual spread");
    return numerator / (denom_mean * denom_mean);
}

// ----------------------------------------------------------------- methods

std::string MethodSpec::name() const {
    switch (kind) {
        case MethodKind::CRR_LASSO: return "CRR-LASSO";
        case MethodKind::CRR_SCAD: return "CRR-SCAD";
        case MethodKind::DCRR_LASSO: return "DCRR-LASSO";
        case MethodKind::DCRR_SCAD: return "DCRR-SCAD(" + std::to_string(T) + ")";
        case MethodKind::DCRR_ORA: return "DCRR-ORA(" + std::to_string(T) + ")";
        case MethodKind::CRR_ORA: return "CRR-ORA";
        case MethodKind::DC_CRR_LASSO: return "DC-CRR-LASSO";
        case MethodKind::DC_CRR_SCAD: return "DC-CRR-SCAD";
    }
    return "?";
}

std::optional<MethodSpec> MethodSpec::parse(const std::string& label) {
    auto with_T = [&](const std::string& prefix, MethodKind kind) -> std::optional<MethodSpec> {
        if (label.rfind(prefix + "(", 0) == 0 && label.back() == ')') {
            const std::string inner = label.substr(prefix.size() + 1,
                                                   label.size() - prefix.size() - 2);
            try {
                return MethodSpec{kind, std::stoi(inner)};
            } catch (...) {
                return std::nullopt;
            }
        }
        return std::nullopt;
    };
    if (label == "CRR-LASSO") return MethodSpec{MethodKind::CRR_LASSO, 1};
    if (label == "CRR-SCAD") return MethodSpec{MethodKind::CRR_SCAD, 2};
    if (label == "DCRR-LASSO") return MethodSpec{MethodKind::DCRR_LASSO, 1};
    if (label == "CRR-ORA") return MethodSpec{MethodKind::CRR_ORA, 1};
    if (label == "DC-CRR-LASSO") return MethodSpec{MethodKind::DC_CRR_LASSO, 1};
    if (label == "DC-CRR-SCAD") return MethodSpec{MethodKind::DC_CRR_SCAD, 2};
    if (auto m = with_T("DCRR-SCAD", MethodKind::DCRR_SCAD)) return m;
    if (auto m = with_T("DCRR-ORA", MethodKind::DCRR_ORA)) return m;
    return std::nullopt;
}

FitResult run_method(const MethodSpec& method, const Scenario& scenario, const FitConfig& base) {
    FitConfig cfg = base;
    const auto true_support = support_of(scenario.beta_star);
    switch (method.kind) {
        case MethodKind::CRR_LASSO:
            cfg.penalty = PenaltySpec(PenaltyKind::L1, 0.0);
            cfg.T = 1;
            cfg.k1 = 1;  // single site: the correction vanishes, iterating is a no-op
            return fit_crr_centralized(scenario.pooled, cfg);
        case MethodKind::CRR_SCAD:
            cfg.penalty = PenaltySpec(PenaltyKind::SCAD, 0.0, base.penalty.shape);
            cfg.T = 2;
            cfg.k1 = 1;
            return fit_crr_centralized(scenario.pooled, cfg);
        case MethodKind::DCRR_LASSO: {
            cfg.penalty = PenaltySpec(PenaltyKind::L1, 0.0);
            cfg.T = 1;
            auto cluster = make_inprocess_cluster(scenario.shards, cfg.kernel);
            return fit_dcrr(*cluster, cfg);
        }
        case MethodKind::DCRR_SCAD: {
            cfg.penalty = PenaltySpec(PenaltyKind::SCAD, 0.0, base.penalty.shape);
            cfg.T = method.T;
            auto cluster = make_inprocess_cluster(scenario.shards, cfg.kernel);
            return fit_dcrr(*cluster, cfg);
        }
        case MethodKind::DCRR_ORA: {
            cfg.T = method.T;
            auto cluster = make_inprocess_cluster(scenario.shards, cfg.kernel);
            return fit_oracle_distributed(*cluster, true_support, cfg);
        }
        case MethodKind::CRR_ORA:
            return fit_oracle_centralized(scenario.pooled, true_support, cfg);
        case MethodKind::DC_CRR_LASSO:
            cfg.penalty = PenaltySpec(PenaltyKind::L1, 0.0);
            cfg.T = 1;
            cfg.k1 = 1;
            return fit_dc_average(scenario.shards, cfg);
        case MethodKind::DC_CRR_SCAD:
            cfg.penalty = PenaltySpec(PenaltyKind::SCAD, 0.0, base.penalty.shape);
            cfg.T = 2;
            cfg.k1 = 1;
            return fit_dc_average(scenario.shards, cfg);
    }
    throw std::logic_error("run_method: unknown method");
}

// ----------------------------------------------------------------- harness

namespace {

struct ReplicateOutput {
    std::vector<MetricRow> rows;
    std::vector<std::vector<Eigen::Index>> supports;
    std::vector<Eigen::VectorXd> betas;
};

ReplicateOutput run_replicate(const ExperimentConfig& cfg, int replicate) {
    const Scenario scenario = make_scenario(cfg.scenario, replicate);
    ReplicateOutput out;
    for (const auto& method : cfg.methods) {
        MetricRow row;
        row.method = method.name();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            FitResult fit = run_method(method, scenario, cfg.fit);
            row = metrics(fit.beta, scenario.beta_star);
            row.method = method.name();
            row.comm_rounds = fit.comm.rounds;
            out.supports.push_back(fit.support);
            out.betas.push_back(fit.beta);
        } catch (const std::exception&) {
            row.failed = true;
            out.supports.emplace_back();
            out.betas.emplace_back(Eigen::VectorXd::Zero(cfg.scenario.p));
        }
        row.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.rows.push_back(std::move(row));
    }
    return out;
}

void accumulate(MethodSummary& s, double MetricRow::* field, double& mean_out, double& se_out,
                const std::vector<const MetricRow*>& rows) {
    const std::size_t k = rows.size();
    if (k == 0) return;
    double mean = 0.0;
    for (const auto* r : rows) mean += r->*field;
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (const auto* r : rows) {
        const double d = r->*field - mean;
        var += d * d;
    }
    var = (k > 1) ? var / static_cast<double>(k - 1) : 0.0;
    mean_out = mean;
    se_out = std::sqrt(var / static_cast<double>(k));
    (void)s;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_signature(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << cfg.scenario.n << "," << cfg.scenario.M << "," << cfg.scenario.p << ","
       << format_double(cfg.scenario.rho) << "," << error_law_name(cfg.scenario.error) << ","
       << cfg.scenario.replicates << "," << cfg.scenario.seed << ",k1=" << cfg.fit.k1
       << ",grid=" << cfg.fit.select.grid_size << ",h=" << format_double(cfg.fit.kernel.h);
    for (const auto& m : cfg.methods) os << "," << m.name();
    return os.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const int R = cfg.scenario.replicates;
    ExperimentResult result;
    result.rows.resize(static_cast<std::size_t>(R));
    result.supports.resize(static_cast<std::size_t>(R));
    result.betas.resize(static_cast<std::size_t>(R));

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(R));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= R) return;
            ReplicateOutput out = run_replicate(cfg, r);
            result.rows[static_cast<std::size_t>(r)] = std::move(out.rows);
            result.supports[static_cast<std::size_t>(r)] = std::move(out.supports);
            result.betas[static_cast<std::size_t>(r)] = std::move(out.betas);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        MethodSummary s;
        s.method = cfg.methods[mi].name();
        s.replicates = R;
        std::vector<const MetricRow*> ok;
        for (int r = 0; r < R; ++r) {
            const MetricRow& row = result.rows[static_cast<std::size_t>(r)][mi];
            if (row.failed)
                ++s.failures;
            else
                ok.push_back(&row);
        }
        accumulate(s, &MetricRow::l1_err, s.l1_mean, s.l1_se, ok);
        accumulate(s, &MetricRow::l2_err, s.l2_mean, s.l2_se, ok);
        accumulate(s, &MetricRow::fp, s.fp_mean, s.fp_se, ok);
        accumulate(s, &MetricRow::fn, s.fn_mean, s.fn_se, ok);
        accumulate(s, &MetricRow::model_size, s.ms_mean, s.ms_se, ok);
        for (const auto* r : ok) {
            s.comm_rounds_mean += static_cast<double>(r->comm_rounds);
            s.wall_time_mean += r->wall_time;
        }
        if (!ok.empty()) {
            s.comm_rounds_mean /= static_cast<double>(ok.size());
            s.wall_time_mean /= static_cast<double>(ok.size());
        }
        result.summaries.push_back(std::move(s));
    }
    return result;
}

std::string experiment_csv(const ExperimentConfig& cfg, const ExperimentResult& result) {
    // wall time is intentionally left out: same seed must give identical bytes
    std::ostringstream os;
    os << "method,l1_mean,l1_se,l2_mean,l2_se,fp_mean,fp_se,fn_mean,fn_se,ms_mean,ms_se,"
          "comm_rounds_mean,failures,replicates,n,M,p,rho,error,seed,config_hash\n";
    const std::uint64_t hash = fnv1a(config_signature(cfg));
    for (const auto& s : result.summaries) {
        os << s.method << "," << format_double(s.l1_mean) << "," << format_double(s.l1_se) << ","
           << format_double(s.l2_mean) << "," << format_double(s.l2_se) << ","
           << format_double(s.fp_mean) << "," << format_double(s.fp_se) << ","
           << format_double(s.fn_mean) << "," << format_double(s.fn_se) << ","
           << format_double(s.ms_mean) << "," << format_double(s.ms_se) << ","
           << format_double(s.comm_rounds_mean) << "," << s.failures << "," << s.replicates << ","
           << cfg.scenario.n << "," << cfg.scenario.M << "," << cfg.scenario.p << ","
           << format_double(cfg.scenario.rho) << "," << error_law_name(cfg.scenario.error) << ","
           << cfg.scenario.seed << "," << hash << "\n";
    }
    return os.str();
}

std::string experiment_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    nlohmann::json j;
    j["config"] = {{"n", cfg.scenario.n},
                   {"M", cfg.scenario.M},
                   {"p", cfg.scenario.p},
                   {"rho", cfg.scenario.rho},
                   {"error", error_law_name(cfg.scenario.error)},
                   {"replicates", cfg.scenario.replicates},
                   {"seed", cfg.scenario.seed},
                   {"k1", cfg.fit.k1},
                   {"grid_size", cfg.fit.select.grid_size},
                   {"kernel_h", cfg.fit.kernel.h}};
    j["config_hash"] = fnv1a(config_signature(cfg));
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& s : result.summaries) {
        summaries.push_back({{"method", s.method},
                             {"l1", {{"mean", s.l1_mean}, {"se", s.l1_se}}},
                             {"l2", {{"mean", s.l2_mean}, {"se", s.l2_se}}},
                             {"fp", {{"mean", s.fp_mean}, {"se", s.fp_se}}},
                             {"fn", {{"mean", s.fn_mean}, {"se", s.fn_se}}},
                             {"model_size", {{"mean", s.ms_mean}, {"se", s.ms_se}}},
                             {"comm_rounds_mean", s.comm_rounds_mean},
                             {"wall_time_mean", s.wall_time_mean},
                             {"failures", s.failures},
                             {"replicates", s.replicates}});
    }
    j["summaries"] = std::move(summaries);
    nlohmann::json reps = nlohmann::json::array();
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        nlohmann::json rep = nlohmann::json::array();
        for (const auto& row : result.rows[r]) {
            rep.push_back({{"method", row.method},
                           {"l1", row.l1_err},
                           {"l2", row.l2_err},
                           {"fp", row.fp},
                           {"fn", row.fn},
                           {"model_size", row.model_size},
                           {"comm_rounds", row.comm_rounds},
                           {"wall_time", row.wall_time},
                           {"failed", row.failed}});
        }
        reps.push_back(std::move(rep));
    }
    j["replicates"] = std::move(reps);
    return j.dump(2) + "\n";
}

std::string error_law_name(ErrorLaw law) {
    switch (law) {
        case ErrorLaw::Normal: return "normal";
        case ErrorLaw::ScaledT4: return "t4";
        case ErrorLaw::Cauchy: return "cauchy";
    }
    return "?";
}

std::optional<ErrorLaw> parse_error_law(const std::string& s) {
    if (s == "normal") return ErrorLaw::Normal;
    if (s == "t4" || s == "scaled_t4") return ErrorLaw::ScaledT4;
    if (s == "cauchy") return ErrorLaw::Cauchy;
    return std::nullopt;
}

}  // namespace dcrr
