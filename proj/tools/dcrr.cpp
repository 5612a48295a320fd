// dcrr command line: simulate (Monte Carlo tables), fit (per-site CSVs),
// bench (backend comparison), serve (host one shard over TCP).

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include "CLI11.hpp"

#include "dcrr/estimators.hpp"
#include "dcrr/simlab.hpp"
#include "dcrr/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

const json& require(const json& j, const char* field) {
    if (!j.contains(field)) throw ConfigError(std::string("missing config field: ") + field);
    return j.at(field);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

dcrr::KernelSpec parse_kernel(const json& j) {
    dcrr::KernelSpec spec;
    if (j.contains("kind")) {
        const std::string k = j.at("kind").get<std::string>();
        if (k == "epanechnikov")
            spec.kind = dcrr::KernelKind::Epanechnikov;
        else if (k == "gaussian")
            spec.kind = dcrr::KernelKind::Gaussian;
        else
            throw ConfigError("kernel.kind must be epanechnikov or gaussian, got " + k);
    }
    if (j.contains("h")) spec.h = j.at("h").get<double>();
    if (!(spec.h > 0.0)) throw ConfigError("kernel.h must be positive");
    return spec;
}

dcrr::FitConfig parse_fit_config(const json& root) {
    dcrr::FitConfig cfg;
    if (!root.contains("fit")) return cfg;
    const json& j = root.at("fit");
    if (j.contains("kernel")) cfg.kernel = parse_kernel(j.at("kernel"));
    if (j.contains("k1")) cfg.k1 = j.at("k1").get<int>();
    if (j.contains("T")) cfg.T = j.at("T").get<int>();
    if (j.contains("scad_a"))
        cfg.penalty = dcrr::PenaltySpec(dcrr::PenaltyKind::SCAD, 0.0, j.at("scad_a").get<double>());
    if (j.contains("tol")) cfg.solver.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.solver.max_iter = j.at("max_iter").get<int>();
    if (j.contains("grid_size")) cfg.select.grid_size = j.at("grid_size").get<int>();
    if (j.contains("grid_min_ratio"))
        cfg.select.grid_min_ratio = j.at("grid_min_ratio").get<double>();
    if (j.contains("fixed_lambda")) cfg.fixed_lambda = j.at("fixed_lambda").get<double>();
    if (cfg.k1 < 1) throw ConfigError("fit.k1 must be >= 1");
    if (cfg.T < 1) throw ConfigError("fit.T must be >= 1");
    return cfg;
}

dcrr::ScenarioConfig parse_scenario(const json& root) {
    const json& j = require(root, "scenario");
    dcrr::ScenarioConfig sc;
    sc.n = require(j, "n").get<Eigen::Index>();
    sc.M = require(j, "M").get<int>();
    sc.p = require(j, "p").get<Eigen::Index>();
    const std::string law = require(j, "error").get<std::string>();
    const auto parsed = dcrr::parse_error_law(law);
    if (!parsed) throw ConfigError("scenario.error must be normal, t4 or cauchy, got " + law);
    sc.error = *parsed;
    if (j.contains("rho")) sc.rho = j.at("rho").get<double>();
    if (j.contains("replicates")) sc.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("signal_count")) sc.signal_count = j.at("signal_count").get<int>();
    if (j.contains("beta_star")) sc.beta_star_values = j.at("beta_star").get<std::vector<double>>();
    if (sc.n < 2 || sc.M < 1 || sc.p < 1 || sc.replicates < 1)
        throw ConfigError("scenario: n >= 2, M >= 1, p >= 1, replicates >= 1 required");
    return sc;
}

std::vector<dcrr::MethodSpec> parse_methods(const json& root) {
    const json& j = require(root, "methods");
    std::vector<dcrr::MethodSpec> methods;
    for (const auto& item : j) {
        const std::string label = item.get<std::string>();
        const auto spec = dcrr::MethodSpec::parse(label);
        if (!spec) throw ConfigError("unknown method label: " + label);
        methods.push_back(*spec);
    }
    if (methods.empty()) throw ConfigError("methods: at least one method required");
    return methods;
}

// ------------------------------------------------------------- CSV loading

struct CsvSite {
    std::string file;
    std::vector<std::string> header;
    dcrr::DataBlock block;
};

CsvSite load_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvSite site;
    site.file = path.filename().string();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) site.header.push_back(cell);
    if (site.header.size() < 2 || site.header.back() != "y")
        throw DataError(path.string() + ": final header column must be 'y'");

    const std::size_t cols = site.header.size();
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw DataError(path.string() + ": non-numeric cell at row " +
                                std::to_string(lineno) + ", column " + std::to_string(col + 1));
            values.push_back(v);
            ++col;
        }
        if (col != cols)
            throw DataError(path.string() + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(col) + " cells, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no data rows");

    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols - 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j + 1 < cols; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
        y[static_cast<Eigen::Index>(i)] = values[i * cols + cols - 1];
    }
    site.block = dcrr::DataBlock(std::move(X), std::move(y));
    return site;
}

std::vector<dcrr::SiteShard> load_site_dir(const std::string& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    if (files.empty()) throw DataError("no .csv files in " + dir);
    std::sort(files.begin(), files.end());

    std::vector<dcrr::SiteShard> shards;
    std::vector<std::string> header;
    std::uint16_t next_id = 0;
    for (const auto& f : files) {
        CsvSite site = load_csv(f);
        if (header.empty())
            header = site.header;
        else if (site.header != header)
            throw DataError(f.string() + ": header differs from " + files.front().string());
        if (site.block.n() < 2) {
            std::cerr << "warning: dropping " << f.filename().string()
                      << " (single-observation sites carry no pairwise information)\n";
            continue;
        }
        shards.push_back(dcrr::SiteShard{next_id++, std::move(site.block), 0.0});
    }
    if (shards.empty()) throw DataError("all sites dropped (every file has n < 2)");
    return shards;
}

// Center every shard by the pooled column means. The pairwise loss is shift
// invariant, so this only affects reporting; it still costs one round of
// mean exchange in a real deployment, which we account for.
void center_shards(std::vector<dcrr::SiteShard>& shards, dcrr::CommStats& extra) {
    const Eigen::Index p = shards.front().data.p();
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
    double ysum = 0.0, n_total = 0.0;
    for (const auto& s : shards) {
        xsum += s.data.X.colwise().sum().transpose();
        ysum += s.data.y.sum();
        n_total += static_cast<double>(s.data.n());
    }
    const Eigen::VectorXd xmean = xsum / n_total;
    const double ymean = ysum / n_total;
    for (auto& s : shards) {
        Eigen::MatrixXd X = s.data.X;
        X.rowwise() -= xmean.transpose();
        s.data = dcrr::DataBlock(std::move(X), s.data.y.array() - ymean);
    }
    extra.rounds += 1;
    extra.bytes_down += static_cast<std::int64_t>(shards.size()) *
                        static_cast<std::int64_t>(dcrr::broadcast_wire_size(static_cast<std::size_t>(p)));
    extra.bytes_up += static_cast<std::int64_t>(shards.size()) *
                      static_cast<std::int64_t>(dcrr::gradient_wire_size(static_cast<std::size_t>(p),
                                                                         dcrr::Purpose::GradAndLoss));
}

json comm_json(const dcrr::CommStats& c) {
    return json{{"rounds", c.rounds},
                {"gradient_rounds", c.gradient_rounds},
                {"loss_rounds", c.loss_rounds},
                {"bytes_down", c.bytes_down},
                {"bytes_up", c.bytes_up}};
}

json fit_json(const dcrr::FitResult& r) {
    json out;
    out["beta"] = std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size());
    out["support"] = r.support;
    out["comm"] = comm_json(r.comm);
    out["converged"] = r.converged;
    out["select_warning"] = r.select_warning;
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

// ------------------------------------------------------------- subcommands

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::string& scale, std::int64_t seed_override) {
    const json root = load_json(config_path);
    dcrr::ExperimentConfig cfg;
    cfg.scenario = parse_scenario(root);
    cfg.methods = parse_methods(root);
    cfg.fit = parse_fit_config(root);
    if (scale == "paper") {
        cfg.scenario.p = 1000;
        cfg.scenario.replicates = 100;
    }
    if (seed_override >= 0) cfg.scenario.seed = static_cast<std::uint64_t>(seed_override);

    const auto t0 = std::chrono::steady_clock::now();
    const dcrr::ExperimentResult result = dcrr::run_experiment(cfg);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string csv = dcrr::experiment_csv(cfg, result);
    write_file(fs::path(out_dir) / "results.csv", csv);
    write_file(fs::path(out_dir) / "results.json", dcrr::experiment_json(cfg, result));
    std::cout << csv;
    std::cerr << "simulate: " << cfg.scenario.replicates << " replicates, "
              << cfg.methods.size() << " methods, " << elapsed << " s\n";
    for (const auto& s : result.summaries)
        if (s.failures > 0)
            std::cerr << "warning: " << s.method << " failed in " << s.failures
                      << " replicates\n";
    return kExitOk;
}

int cmd_fit(const std::string& data_dir, const std::string& config_path,
            const std::string& out_path, const std::string& backend) {
    json root = json::object();
    std::string config_text = "{}";
    if (!config_path.empty()) {
        root = load_json(config_path);
        config_text = slurp(config_path);
    }
    dcrr::FitConfig cfg = parse_fit_config(root);

    std::vector<dcrr::SiteShard> shards = load_site_dir(data_dir);
    dcrr::CommStats extra;
    center_shards(shards, extra);

    dcrr::FitResult result;
    if (backend == "socket") {
        // self-host every non-master shard on localhost ephemeral ports
        std::vector<dcrr::SiteShard> sorted = shards;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            return a.data.n() != b.data.n() ? a.data.n() > b.data.n() : a.site_id < b.site_id;
        });
        dcrr::SiteShard master = sorted.front();
        std::vector<std::unique_ptr<dcrr::SiteServer>> servers;
        std::vector<std::pair<std::string, std::uint16_t>> addrs;
        for (const auto& s : shards) {
            servers.push_back(std::make_unique<dcrr::SiteServer>(s, cfg.kernel));
            addrs.emplace_back("127.0.0.1", servers.back()->port());
        }
        dcrr::SocketCluster cluster(addrs, std::move(master), cfg.kernel);
        result = dcrr::fit_dcrr(cluster, cfg);
        for (auto& srv : servers) srv->stop();
    } else {
        auto cluster = dcrr::make_inprocess_cluster(std::move(shards), cfg.kernel);
        result = dcrr::fit_dcrr(*cluster, cfg);
    }
    result.comm.rounds += extra.rounds;
    result.comm.bytes_down += extra.bytes_down;
    result.comm.bytes_up += extra.bytes_up;

    json out = fit_json(result);
    out["config_hash"] = fnv1a(config_text);
    out["backend"] = backend;
    const std::string text = out.dump(2) + "\n";
    if (out_path.empty() || out_path == "-")
        std::cout << text;
    else
        write_file(out_path, text);
    if (!result.converged) {
        std::cerr << "error: solver failed to converge\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& out_path) {
    json root = config_path.empty() ? json::object() : load_json(config_path);
    dcrr::ScenarioConfig sc;
    if (root.contains("scenario"))
        sc = parse_scenario(root);
    else {
        sc.n = 60;
        sc.M = 3;
        sc.p = 20;
    }
    dcrr::FitConfig cfg = parse_fit_config(root);
    const dcrr::Scenario scenario = dcrr::make_scenario(sc, 0);

    const auto t0 = std::chrono::steady_clock::now();
    auto in_cluster = dcrr::make_inprocess_cluster(scenario.shards, cfg.kernel);
    const dcrr::FitResult in_fit = dcrr::fit_dcrr(*in_cluster, cfg);
    const double in_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<std::unique_ptr<dcrr::SiteServer>> servers;
    std::vector<std::pair<std::string, std::uint16_t>> addrs;
    for (const auto& s : scenario.shards) {
        servers.push_back(std::make_unique<dcrr::SiteServer>(s, cfg.kernel));
        addrs.emplace_back("127.0.0.1", servers.back()->port());
    }
    // same master-selection rule as the in-process backend
    dcrr::SiteShard master = scenario.shards.front();
    for (const auto& s : scenario.shards)
        if (s.data.n() > master.data.n()) master = s;

    const auto t1 = std::chrono::steady_clock::now();
    dcrr::SocketCluster sock_cluster(addrs, std::move(master), cfg.kernel);
    const dcrr::FitResult sock_fit = dcrr::fit_dcrr(sock_cluster, cfg);
    const double sock_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    for (auto& srv : servers) srv->stop();

    const bool equal = in_fit.beta.size() == sock_fit.beta.size() &&
                       std::equal(in_fit.beta.data(), in_fit.beta.data() + in_fit.beta.size(),
                                  sock_fit.beta.data());
    json out;
    out["scenario"] = {{"n", sc.n}, {"M", sc.M}, {"p", sc.p}, {"seed", sc.seed}};
    out["config_hash"] = fnv1a(config_path.empty() ? "{}" : slurp(config_path));
    out["inprocess"] = comm_json(in_fit.comm);
    out["inprocess"]["wall_time"] = in_time;
    out["socket"] = comm_json(sock_fit.comm);
    out["socket"]["wall_time"] = sock_time;
    out["beta_identical"] = equal;
    const std::string text = out.dump(2) + "\n";
    if (out_path.empty() || out_path == "-")
        std::cout << text;
    else
        write_file(out_path, text);
    if (!equal) {
        std::cerr << "error: backend results differ\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_serve(const std::string& csv_path, int site_id, int port, const std::string& kernel_json) {
    dcrr::KernelSpec kernel;
    if (!kernel_json.empty()) kernel = parse_kernel(json::parse(kernel_json));
    CsvSite site = load_csv(csv_path);
    dcrr::SiteShard shard{static_cast<std::uint16_t>(site_id), std::move(site.block), 0.0};
    dcrr::SiteServer server(std::move(shard), kernel, static_cast<std::uint16_t>(port));
    std::cout << "serving site " << site_id << " on port " << server.port() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed convoluted rank regression toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", scale = "desk";
    std::int64_t seed_override = -1;
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
    sim->add_option("--config", config_path, "JSON experiment config")->required();
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    sim->add_option("--seed", seed_override, "override scenario seed");

    std::string data_dir, fit_config, fit_out, backend = "inprocess";
    auto* fit = app.add_subcommand("fit", "fit per-site CSV data");
    fit->add_option("--data", data_dir, "directory of per-site CSVs")->required();
    fit->add_option("--config", fit_config, "JSON fit config");
    fit->add_option("--out", fit_out, "output JSON path (default stdout)");
    fit->add_option("--backend", backend, "inprocess or socket")
        ->check(CLI::IsMember({"inprocess", "socket"}));

    std::string bench_config, bench_out;
    auto* bench = app.add_subcommand("bench", "compare transport backends");
    bench->add_option("--config", bench_config, "JSON config with optional scenario");
    bench->add_option("--out", bench_out, "output JSON path (default stdout)");

    std::string serve_csv, serve_kernel;
    int serve_id = 0, serve_port = 0;
    auto* serve = app.add_subcommand("serve", "host one site shard over TCP");
    serve->add_option("--data", serve_csv, "site CSV file")->required();
    serve->add_option("--site-id", serve_id, "site id");
    serve->add_option("--port", serve_port, "port (0 = ephemeral)");
    serve->add_option("--kernel", serve_kernel, "kernel JSON, e.g. {\"kind\":\"gaussian\",\"h\":1}");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, scale, seed_override);
        if (fit->parsed()) return cmd_fit(data_dir, fit_config, fit_out, backend);
        if (bench->parsed()) return cmd_bench(bench_config, bench_out);
        if (serve->parsed()) return cmd_serve(serve_csv, serve_id, serve_port, serve_kernel);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
