// fot: config-driven front end for the functional optimal transport library.
//
// Subcommands: generate | fit | push | experiment | validate-config.
// Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O.
// Outputs are byte-for-byte determined by (config, seed).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fot/fot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

int log_level() {
    const char* env = std::getenv("FOT_LOG_LEVEL");
    return env ? std::atoi(env) : 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "fot: " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& where) {
    if (!j.is_object())
        throw fot::ParameterError("config: section '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw fot::ParameterError("config: unknown key '" + key + "' in " + where);
    }
}

void validate_config(const json& cfg) {
    reject_unknown(cfg, {"seed", "out_dir", "data", "basis", "solver", "eval"}, "top level");
    if (cfg.contains("data")) {
        reject_unknown(cfg.at("data"),
                       {"n_source", "n_target", "points_min", "points_max", "family",
                        "coeff_sigma", "noise_sigma", "source_components",
                        "target_components", "truth", "k_star", "source_path",
                        "target_path", "format"},
                       "data");
        for (const char* side : {"source_components", "target_components"})
            if (cfg.at("data").contains(side))
                for (const auto& c : cfg.at("data").at(side))
                    reject_unknown(c, {"amplitude", "omega", "phase", "shift"},
                                   std::string("data.") + side + "[]");
    }
    if (cfg.contains("basis")) {
        reject_unknown(cfg.at("basis"), {"source", "target"}, "basis");
        for (const char* side : {"source", "target"})
            if (cfg.at("basis").contains(side))
                reject_unknown(cfg.at("basis").at(side),
                               {"kind", "count", "lengthscale", "sigma"},
                               std::string("basis.") + side);
    }
    if (cfg.contains("solver"))
        reject_unknown(cfg.at("solver"),
                       {"preset", "eta", "gamma_h", "gamma_p", "p", "k1", "k2", "lr_lambda",
                        "lr_pi", "t_max", "inner_lambda_steps", "rho", "coupling_tol",
                        "coupling_max_iters", "rel_decrease_tol", "quadrature_weighted",
                        "identity_init"},
                       "solver");
    if (cfg.contains("eval"))
        reject_unknown(cfg.at("eval"),
                       {"protocol", "k_grid", "seeds", "n_samples", "n_eval", "k_star",
                        "grid_points", "methods"},
                       "eval");
}

json preset_config(const std::string& name) {
    json cfg;
    cfg["seed"] = 1;
    if (name.empty()) return cfg;
    if (name == "fig2-left") {
        cfg["data"] = {{"n_source", 30},      {"n_target", 30},
                       {"points_min", 50},    {"points_max", 60},
                       {"family", "basis_span"}, {"coeff_sigma", 0.5},
                       {"noise_sigma", 0.1},  {"truth", "near_identity_diag"},
                       {"k_star", 15}};
        cfg["basis"] = {{"source", {{"kind", "brownian"}, {"count", 20}}},
                        {"target", {{"kind", "brownian"}, {"count", 20}}}};
        cfg["solver"] = {{"preset", "sim51"},          {"k1", 15},
                         {"k2", 15},                   {"t_max", 300},
                         {"inner_lambda_steps", 100},  {"coupling_tol", 1e-7},
                         {"coupling_max_iters", 2000}, {"quadrature_weighted", true}};
        cfg["eval"] = {{"protocol", "fig2-left"},
                       {"k_grid", {3, 5, 10, 15, 20}},
                       {"seeds", {1, 2, 3}},
                       {"n_samples", 30},
                       {"k_star", 15}};
        return cfg;
    }
    if (name == "fig2-right") {
        cfg = preset_config("fig2-left");
        cfg["eval"]["protocol"] = "fig2-right";
        return cfg;
    }
    if (name == "appendix") {
        cfg["solver"] = {{"preset", "appendix"}, {"k1", 15}, {"k2", 15}};
        return cfg;
    }
    if (name == "sim51") {
        cfg["solver"] = {{"preset", "sim51"}, {"k1", 15}, {"k2", 15}};
        return cfg;
    }
    if (name == "baselines") {
        // One source component mapped onto a two-component target mixture.
        cfg["data"] = {{"n_source", 30},
                       {"n_target", 30},
                       {"points_min", 50},
                       {"points_max", 60},
                       {"source_components",
                        json::array({{{"amplitude", {1.0, 3.0}},
                                      {"omega", {std::numbers::pi, 3.0 * std::numbers::pi}},
                                      {"phase", {0.0, 2.0 * std::numbers::pi}},
                                      {"shift", {-0.5, 0.5}}}})},
                       {"target_components",
                        json::array({{{"amplitude", {0.5, 1.5}},
                                      {"omega", {0.5 * std::numbers::pi, 4.0 * std::numbers::pi}},
                                      {"phase", {0.0, 2.0 * std::numbers::pi}},
                                      {"shift", {-0.5, 0.5}}},
                                     {{"amplitude", {2.0, 4.0}},
                                      {"omega", {0.5 * std::numbers::pi, 4.0 * std::numbers::pi}},
                                      {"phase", {0.0, 2.0 * std::numbers::pi}},
                                      {"shift", {0.5, 1.5}}}})}};
        cfg["basis"] = {{"source", {{"kind", "brownian"}, {"count", 15}}},
                        {"target", {{"kind", "brownian"}, {"count", 15}}}};
        cfg["solver"] = {{"preset", "sim51"},          {"k1", 15},
                         {"k2", 15},                   {"t_max", 300},
                         {"inner_lambda_steps", 100},  {"coupling_tol", 1e-7},
                         {"coupling_max_iters", 2000}, {"quadrature_weighted", true},
                         {"identity_init", true}};
        cfg["eval"] = {{"protocol", "baselines"},
                       {"grid_points", 50},
                       {"n_eval", 30},
                       {"methods", {"FOT", "GPOT", "VectorSinkhorn"}}};
        return cfg;
    }
    throw fot::ParameterError("unknown preset '" + name + "'");
}

void merge_into(json& base, const json& overlay) {
    for (const auto& [key, value] : overlay.items()) {
        if (value.is_object() && base.contains(key) && base.at(key).is_object())
            merge_into(base[key], value);
        else
            base[key] = value;
    }
}

struct Cli {
    std::string config_path;
    std::string preset;
    std::string out_dir = "out";
    std::int64_t seed = -1; // -1: take from config
    bool out_set = false;

    json load() const {
        json cfg = preset_config(preset);
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw fot::IoError("cannot open config: " + config_path);
            json file_cfg;
            try {
                f >> file_cfg;
            } catch (const json::exception& e) {
                throw fot::ParseError(config_path + ": " + e.what());
            }
            merge_into(cfg, file_cfg);
        }
        if (seed >= 0) cfg["seed"] = seed;
        validate_config(cfg);
        return cfg;
    }

    fs::path resolve_out(const json&) const {
        if (!out_set)
            if (const char* env = std::getenv("FOT_OUT_DIR")) return env;
        return out_dir;
    }
};

// ---------------------------------------------------------------------------
// Config -> domain objects
// ---------------------------------------------------------------------------

fot::SinusoidComponent component_from_json(const json& c) {
    fot::SinusoidComponent out;
    auto range = [&](const char* key, double& lo, double& hi) {
        if (!c.contains(key)) return;
        const auto v = c.at(key).get<std::vector<double>>();
        if (v.size() != 2) throw fot::ParameterError(std::string("component ") + key +
                                                     " must be a [lo, hi] pair");
        lo = v[0];
        hi = v[1];
    };
    range("amplitude", out.amplitude_lo, out.amplitude_hi);
    range("omega", out.omega_lo, out.omega_hi);
    range("phase", out.phase_lo, out.phase_hi);
    range("shift", out.shift_lo, out.shift_hi);
    return out;
}

fot::SinusoidMixtureParams mixture_from_json(const json& data, const std::string& side) {
    fot::SinusoidMixtureParams params;
    params.points_min = data.value("points_min", 20);
    params.points_max = data.value("points_max", params.points_min);
    const std::string key = side + "_components";
    if (data.contains(key))
        for (const auto& c : data.at(key)) params.components.push_back(component_from_json(c));
    if (params.components.empty()) {
        // Default: a rich unimodal component.
        fot::SinusoidComponent c;
        c.amplitude_lo = 1.0;
        c.amplitude_hi = 3.0;
        c.omega_lo = std::numbers::pi;
        c.omega_hi = 3.0 * std::numbers::pi;
        c.phase_lo = 0.0;
        c.phase_hi = 2.0 * std::numbers::pi;
        c.shift_lo = -0.5;
        c.shift_hi = 0.5;
        params.components = {c};
    }
    return params;
}

fot::BasisSet basis_from_json(const json& cfg, const std::string& side, int min_count) {
    std::string kind = "brownian";
    int count = min_count;
    double lengthscale = 1.0, sigma = 1.0;
    if (cfg.contains("basis") && cfg.at("basis").contains(side)) {
        const auto& b = cfg.at("basis").at(side);
        kind = b.value("kind", kind);
        count = std::max(min_count, b.value("count", count));
        lengthscale = b.value("lengthscale", lengthscale);
        sigma = b.value("sigma", sigma);
    }
    if (kind == "brownian") return fot::BasisSet::brownian(count);
    if (kind == "squared_exponential")
        return fot::BasisSet::squared_exponential(lengthscale, sigma, count);
    throw fot::ParameterError("basis kind '" + kind + "' is not available from the CLI");
}

fot::SolverConfig solver_from_json(const json& cfg) {
    fot::SolverConfig sc;
    if (!cfg.contains("solver")) return sc;
    const auto& s = cfg.at("solver");
    const std::string preset = s.value("preset", "");
    if (preset == "appendix") sc = fot::SolverConfig::preset_appendix();
    else if (preset == "sim51") sc = fot::SolverConfig::preset_sim51();
    else if (!preset.empty())
        throw fot::ParameterError("unknown solver preset '" + preset + "'");
    sc.eta = s.value("eta", sc.eta);
    sc.gamma_h = s.value("gamma_h", sc.gamma_h);
    sc.gamma_p = s.value("gamma_p", sc.gamma_p);
    sc.p = s.value("p", sc.p);
    sc.k1 = s.value("k1", sc.k1);
    sc.k2 = s.value("k2", sc.k2);
    sc.lr_lambda = s.value("lr_lambda", sc.lr_lambda);
    sc.lr_pi = s.value("lr_pi", sc.lr_pi);
    sc.t_max = s.value("t_max", sc.t_max);
    sc.inner_lambda_steps = s.value("inner_lambda_steps", sc.inner_lambda_steps);
    sc.rho = s.value("rho", sc.rho);
    sc.coupling_tol = s.value("coupling_tol", sc.coupling_tol);
    sc.coupling_max_iters = s.value("coupling_max_iters", sc.coupling_max_iters);
    sc.rel_decrease_tol = s.value("rel_decrease_tol", sc.rel_decrease_tol);
    sc.quadrature_weighted = s.value("quadrature_weighted", sc.quadrature_weighted);
    sc.identity_init = s.value("identity_init", sc.identity_init);
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& cfg,
                    json extra = json::object()) {
    json m;
    m["command"] = command;
    m["config"] = cfg;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.dump())));
    m["config_hash"] = hash;
    m["seed"] = cfg.value("seed", 0);
    m["version"] = kVersion;
    for (const auto& [key, value] : extra.items()) m[key] = value;
    std::ofstream f(dir / "manifest.json");
    if (!f) throw fot::IoError("cannot write manifest in " + dir.string());
    f << m.dump(2) << '\n';
}

std::string dataset_format(const json& cfg) {
    if (cfg.contains("data")) return cfg.at("data").value("format", "json");
    return "json";
}

fot::FunctionalDataset load_by_extension(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        return fot::load_dataset_csv(path);
    return fot::load_dataset_json(path);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_generate(const Cli& cli) {
    const json cfg = cli.load();
    const auto& data = cfg.at("data");
    const int n_source = data.value("n_source", 30);
    const int n_target = data.value("n_target", n_source);
    const std::string format = dataset_format(cfg);
    const std::string ext = format == "csv" ? ".csv" : ".json";

    fot::Rng rng(static_cast<std::uint64_t>(cfg.value("seed", 1)));
    const std::string family = data.value("family", "sinusoid_mixture");
    const int k_star = data.value("k_star", 15);
    fot::FunctionalDataset source;
    if (family == "basis_span") {
        const fot::BasisSet basis = basis_from_json(cfg, "source", k_star);
        source = fot::generate_basis_span(n_source, basis, k_star,
                                          data.value("points_min", 20),
                                          data.value("points_max", 20),
                                          data.value("coeff_sigma", 0.5), rng);
    } else if (family == "sinusoid_mixture") {
        source = fot::generate_sinusoid_mixture(n_source, mixture_from_json(data, "source"), rng);
    } else {
        throw fot::ParameterError("data.family must be 'sinusoid_mixture' or 'basis_span'");
    }
    source.domain = "source";

    json extra;
    fot::FunctionalDataset target;
    const std::string truth = data.value("truth", "none");
    if (truth == "random_block" || truth == "near_identity_diag") {
        const fot::BasisSet basis = basis_from_json(cfg, "source", k_star);
        const Eigen::MatrixXd lambda =
            truth == "random_block"
                ? fot::ground_truth_block(k_star, basis.count(), rng)
                : fot::ground_truth_diag(k_star, basis.count(), rng);
        const fot::OperatorCoeffs op(lambda, basis, basis);
        target = fot::pushforward_dataset(source, op, data.value("points_min", 20),
                                          data.value("points_max", 20), rng);
        const double noise = data.value("noise_sigma", 0.0);
        if (noise > 0.0)
            for (auto& s : target.samples)
                for (Eigen::Index i = 0; i < s.y.size(); ++i) s.y(i) += noise * rng.normal();
        extra["k_star"] = {k_star, k_star};
    } else if (truth == "none") {
        target = fot::generate_sinusoid_mixture(n_target, mixture_from_json(data, "target"), rng);
        target.domain = "target";
    } else {
        throw fot::ParameterError(
            "data.truth must be 'none', 'random_block', or 'near_identity_diag'");
    }

    const fs::path dir = cli.resolve_out(cfg);
    fs::create_directories(dir);
    fot::save_dataset(source, (dir / ("source" + ext)).string(), format);
    fot::save_dataset(target, (dir / ("target" + ext)).string(), format);
    write_manifest(dir, "generate", cfg, extra);
    info("wrote " + (dir / ("source" + ext)).string() + ", " +
         (dir / ("target" + ext)).string());
    return kOk;
}

void write_trace_csv(const std::vector<fot::ObjectiveRecord>& trace, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw fot::IoError("cannot write " + path.string());
    f << "t,total,transport,entropy,lp,ridge\n";
    char buf[64];
    for (std::size_t t = 0; t < trace.size(); ++t) {
        f << t;
        for (const double v : {trace[t].total, trace[t].transport, trace[t].entropy,
                               trace[t].lp, trace[t].ridge}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            f << ',' << buf;
        }
        f << '\n';
    }
}

int cmd_fit(const Cli& cli) {
    const json cfg = cli.load();
    if (!cfg.contains("data") || !cfg.at("data").contains("source_path") ||
        !cfg.at("data").contains("target_path"))
        throw fot::ParameterError("fit: config needs data.source_path and data.target_path");
    const auto source = load_by_extension(cfg.at("data").at("source_path"));
    const auto target = load_by_extension(cfg.at("data").at("target_path"));
    const fot::SolverConfig sc = solver_from_json(cfg);
    const fot::BasisSet src_b = basis_from_json(cfg, "source", sc.k1);
    const fot::BasisSet tgt_b = basis_from_json(cfg, "target", sc.k2);

    const fs::path dir = cli.resolve_out(cfg);
    fs::create_directories(dir);
    fot::FitResult result;
    try {
        result = fot::fit(source, target, src_b, tgt_b, sc);
    } catch (const fot::ConvergenceError&) {
        // Surface the numerical failure but leave the trace for post-mortems.
        write_trace_csv(result.trace, dir / "trace.csv");
        throw;
    }
    json out = fot::fit_result_to_json(result, src_b.truncated(sc.k1), tgt_b.truncated(sc.k2));
    {
        std::ofstream f(dir / "fit.json");
        if (!f) throw fot::IoError("cannot write " + (dir / "fit.json").string());
        f << out.dump(2) << '\n';
    }
    write_trace_csv(result.trace, dir / "trace.csv");
    write_manifest(dir, "fit", cfg);
    info("fit " + result.message + " after " + std::to_string(result.trace.size()) +
         " outer iterations");
    return kOk;
}

int cmd_push(const Cli& cli, const std::string& map_path, const std::string& curves_path,
             int grid_points) {
    json fit_json;
    {
        std::ifstream f(map_path);
        if (!f) throw fot::IoError("cannot open map file: " + map_path);
        try {
            f >> fit_json;
        } catch (const json::exception& e) {
            throw fot::ParseError(map_path + ": " + e.what());
        }
    }
    const json& op_json = fit_json.contains("operator") ? fit_json.at("operator") : fit_json;
    const fot::OperatorCoeffs op = fot::operator_from_json(op_json);
    const auto curves = load_by_extension(curves_path);
    const fot::FunctionalDataset pushed =
        fot::pushforward_dataset(curves, op, fot::uniform_grid(0.0, 1.0, grid_points));

    const fs::path dir = cli.resolve_out(json{});
    fs::create_directories(dir);
    fot::save_dataset_json(pushed, (dir / "pushed.json").string());
    json cfg;
    cfg["map"] = map_path;
    cfg["curves"] = curves_path;
    cfg["grid_points"] = grid_points;
    write_manifest(dir, "push", cfg);
    return kOk;
}

int cmd_experiment(const Cli& cli, std::string protocol) {
    const json cfg = cli.load();
    if (protocol.empty() && cfg.contains("eval"))
        protocol = cfg.at("eval").value("protocol", "");
    if (protocol.empty())
        throw fot::ParameterError("experiment: no protocol given (flag or eval.protocol)");

    const fs::path dir = cli.resolve_out(cfg);
    fs::create_directories(dir);
    char buf[64];
    bool any_failed = false;

    if (protocol == "fig2-left" || protocol == "fig2-right") {
        fot::SimProtocolConfig pc;
        pc.solver = solver_from_json(cfg);
        if (cfg.contains("eval")) {
            const auto& e = cfg.at("eval");
            pc.n_samples = e.value("n_samples", pc.n_samples);
            pc.k_star = e.value("k_star", pc.k_star);
            pc.k_grid = e.value("k_grid", pc.k_grid);
            pc.seeds = e.value("seeds", pc.seeds);
        }
        if (cfg.contains("data")) {
            pc.points_min = cfg.at("data").value("points_min", pc.points_min);
            pc.points_max = cfg.at("data").value("points_max", pc.points_max);
            pc.noise_sigma = cfg.at("data").value("noise_sigma", pc.noise_sigma);
            pc.coeff_sigma = cfg.at("data").value("coeff_sigma", pc.coeff_sigma);
        }
        const auto rows = protocol == "fig2-left" ? fot::run_fig2_left(pc)
                                                  : fot::run_fig2_right(pc);
        const std::string file = protocol == "fig2-left" ? "fig2_left.csv" : "fig2_right.csv";
        const std::string value_col = protocol == "fig2-left" ? "loss" : "frobenius";
        std::ofstream f(dir / file);
        if (!f) throw fot::IoError("cannot write " + (dir / file).string());
        f << "k," << value_col << "\n";
        for (const auto& row : rows) {
            if (row.failed) {
                any_failed = true;
                info("K=" + std::to_string(row.k) + " failed: " + row.error);
            }
            std::snprintf(buf, sizeof buf, "%.17g", row.value);
            f << row.k << ',' << buf << '\n';
        }
    } else if (protocol == "baselines") {
        fot::BaselineConfig bc;
        bc.solver = solver_from_json(cfg);
        if (cfg.contains("eval")) {
            bc.grid_points = cfg.at("eval").value("grid_points", bc.grid_points);
            bc.methods = cfg.at("eval").value("methods", bc.methods);
        }
        bc.source_basis = basis_from_json(cfg, "source", bc.solver.k1);
        bc.target_basis = basis_from_json(cfg, "target", bc.solver.k2);
        const auto& data = cfg.at("data");
        fot::Rng rng(static_cast<std::uint64_t>(cfg.value("seed", 1)));
        const auto source = fot::generate_sinusoid_mixture(
            data.value("n_source", 30), mixture_from_json(data, "source"), rng);
        const auto target = fot::generate_sinusoid_mixture(
            data.value("n_target", 30), mixture_from_json(data, "target"), rng);
        const int n_eval =
            cfg.contains("eval") ? cfg.at("eval").value("n_eval", 30) : 30;
        const auto eval_src =
            fot::generate_sinusoid_mixture(n_eval, mixture_from_json(data, "source"), rng);
        const auto eval_tgt =
            fot::generate_sinusoid_mixture(n_eval, mixture_from_json(data, "target"), rng);
        const auto rows = fot::compare_baselines(source, target, eval_src, eval_tgt, bc);
        std::ofstream f(dir / "baselines.csv");
        if (!f) throw fot::IoError("cannot write " + (dir / "baselines.csv").string());
        f << "method,loss\n";
        for (const auto& row : rows) {
            if (row.failed) {
                any_failed = true;
                info(row.method + " failed: " + row.error);
            }
            std::snprintf(buf, sizeof buf, "%.17g", row.loss);
            f << row.method << ',' << buf << '\n';
        }
    } else {
        throw fot::ParameterError("unknown protocol '" + protocol + "'");
    }

    write_manifest(dir, "experiment", cfg, json{{"protocol", protocol}});
    if (any_failed) throw fot::ConvergenceError("experiment: at least one grid cell failed");
    return kOk;
}

int cmd_validate_config(const Cli& cli) {
    const json cfg = cli.load();
    solver_from_json(cfg); // also exercise the solver section
    std::cout << "ok\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"functional optimal transport toolkit"};
    app.require_subcommand(1);

    Cli cli;
    std::string protocol;
    std::string map_path, curves_path;
    int grid_points = 101;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "JSON config file");
        sub->add_option("--preset", cli.preset,
                        "built-in preset: fig2-left, fig2-right, appendix, sim51, baselines");
        sub->add_option("--seed", cli.seed, "override the config seed");
        sub->add_option("--out", cli.out_dir, "output directory")
            ->each([&](const std::string&) { cli.out_set = true; });
    };

    auto* gen = app.add_subcommand("generate", "draw synthetic source/target datasets");
    add_common(gen);
    auto* fit = app.add_subcommand("fit", "learn the operator and coupling from datasets");
    add_common(fit);
    auto* push = app.add_subcommand("push", "push saved curves through a saved map");
    add_common(push);
    push->add_option("--map", map_path, "fit.json or operator JSON")->required();
    push->add_option("--curves", curves_path, "dataset to push")->required();
    push->add_option("--grid-points", grid_points, "evaluation grid size");
    auto* exp = app.add_subcommand("experiment", "run a full experiment protocol");
    add_common(exp);
    exp->add_option("--protocol", protocol, "fig2-left | fig2-right | baselines");
    auto* val = app.add_subcommand("validate-config", "check a config against the schema");
    add_common(val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (gen->parsed()) return cmd_generate(cli);
        if (fit->parsed()) return cmd_fit(cli);
        if (push->parsed()) return cmd_push(cli, map_path, curves_path, grid_points);
        if (exp->parsed()) return cmd_experiment(cli, protocol);
        if (val->parsed()) return cmd_validate_config(cli);
    } catch (const fot::ConvergenceError& e) {
        std::cerr << "fot: numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const fot::IoError& e) {
        std::cerr << "fot: i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const fot::Error& e) {
        std::cerr << "fot: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "fot: " << e.what() << '\n';
        return kValidation;
    }
    return kOk;
}
