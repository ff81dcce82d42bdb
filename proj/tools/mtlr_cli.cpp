// mtlr: synthetic sweeps, single fits, cross-validation, geometry diagnostics and the HAR protocol.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtlr/config.hpp"
#include "mtlr/error.hpp"
#include "mtlr/evaluation.hpp"
#include "mtlr/io.hpp"
#include "mtlr/synthetic.hpp"

using namespace mtlr;

namespace {

// Keys that can be given directly as --key VALUE on every subcommand.
const std::vector<std::string> kFlagKeys{
    "n",      "m",       "d",      "delta",   "eps",     "alpha",   "r_out",          "noise_sd",
    "W",      "sweep_values", "q_grid", "k_folds", "reps", "seed",    "output",         "format",
    "methods", "weights", "xi",    "threads", "record_runtime", "data_dir", "tasks", "logistic",
    "standardize", "test_fraction", "q"};

struct CommonArgs {
    std::string config_path;
    std::string manifest;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
};

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("--config", args.config_path, "key=value config file");
    app->add_option("--manifest", args.manifest, "replay the config recorded in a results manifest");
    app->add_option("--set", args.sets, "extra key=value override (repeatable)");
    for (const auto& k : kFlagKeys) app->add_option("--" + k, args.flags[k]);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig resolve(const CommonArgs& args, std::optional<Mode> forced_mode, const std::string& mode_flag) {
    std::map<std::string, std::string> over;
    if (!args.manifest.empty()) over = manifest_overrides(slurp(args.manifest));
    for (const auto& s : args.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ConfigParseError, "--set expects key=value, got '" + s + "'");
        over[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [k, v] : args.flags) {
        if (!v.empty()) over[k] = v;
    }
    if (!mode_flag.empty()) over["mode"] = mode_flag;
    if (forced_mode) over["mode"] = std::string(to_string(*forced_mode));
    const std::string text = args.config_path.empty() ? std::string() : slurp(args.config_path);
    return parse_config(text, over);
}

std::string show(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Per (method, sweep value) means of the main columns, for a quick look on stdout.
void print_summary(const MetricsTable& t, bool classification) {
    struct Acc {
        double all = 0, rel = 0, out = 0, err = 0;
        int n = 0, nrel = 0, nout = 0, nerr = 0, failed = 0;
    };
    std::map<std::pair<int, double>, Acc> acc;
    for (const auto& r : t.rows) {
        auto& a = acc[{static_cast<int>(r.method), r.sweep_value}];
        if (!r.converged) ++a.failed;
        if (r.mse_all) { a.all += *r.mse_all; ++a.n; }
        if (r.mse_related) { a.rel += *r.mse_related; ++a.nrel; }
        if (r.mse_outlier) { a.out += *r.mse_outlier; ++a.nout; }
        if (r.error_rate) { a.err += *r.error_rate; ++a.nerr; }
    }
    if (classification) {
        std::printf("%-6s %12s %8s\n", "method", "error_rate", "flagged");
    } else {
        std::printf("%-6s %10s %10s %10s %10s %8s\n", "method", "value", "mse_all", "related", "outlier", "flagged");
    }
    for (const auto& [key, a] : acc) {
        const auto name = std::string(to_string(static_cast<Method>(key.first)));
        if (classification) {
            std::printf("%-6s %12s %8d\n", name.c_str(), show(a.nerr ? a.err / a.nerr : NAN).c_str(), a.failed);
        } else {
            std::printf("%-6s %10s %10s %10s %10s %8d\n", name.c_str(), show(key.second).c_str(),
                        show(a.n ? a.all / a.n : NAN).c_str(), show(a.nrel ? a.rel / a.nrel : NAN).c_str(),
                        show(a.nout ? a.out / a.nout : NAN).c_str(), a.failed);
        }
    }
}

MultiTaskDataset tasks_from(const ExperimentConfig& c) {
    if (c.tasks_path.empty()) throw Error(ErrorCode::ConfigError, "--tasks is required");
    return load_tasks_csv(c.tasks_path, c.logistic ? ModelKind::Logistic : ModelKind::Linear);
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
    f << text;
}

int cmd_sweep(const ExperimentConfig& c) {
    if (!is_sweep(c.mode)) throw Error(ErrorCode::ConfigError, "sweep needs a sweep_* mode");
    const auto table = run_sweep(c);
    const std::string out = c.output_path.empty() ? std::string(to_string(c.mode)) + "." + c.format : c.output_path;
    emit_results(table, out, c.format, c);
    print_summary(table, false);
    std::cerr << "wrote " << out << " and " << manifest_path(out) << "\n";
    return 0;
}

int cmd_fit(const ExperimentConfig& c) {
    const auto ds = tasks_from(c);
    const auto geoms = second_moments(ds);
    const GlmSpec spec = GlmSpec::logistic(c.xi);
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (Method m : c.methods) {
        const auto fit = fit_method(ds, geoms, m, c.q, c.weights, spec);
        nlohmann::ordered_json j;
        j["q"] = c.q;
        j["objective"] = fit.objective;
        j["converged"] = fit.converged;
        j["iterations"] = fit.iterations;
        j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
        nlohmann::ordered_json th = nlohmann::ordered_json::array();
        for (const auto& t : fit.thetas) th.push_back(std::vector<double>(t.data(), t.data() + t.size()));
        j["thetas"] = th;
        j["deviation_seminorm"] = fit.per_task_deviation_seminorm;
        out[std::string(to_string(m))] = j;
    }
    write_or_print(c.output_path, out.dump(2) + "\n");
    return 0;
}

int cmd_cv(const ExperimentConfig& c) {
    const auto ds = tasks_from(c);
    const GlmSpec spec = GlmSpec::logistic(c.xi);
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (Method m : c.methods) {
        const auto cv = kfold_cv_q(ds, m, c.q_grid, c.k_folds, c.seed, c.weights, spec);
        out[std::string(to_string(m))] = {{"q_best", cv.q_best}, {"q_grid", c.q_grid}, {"scores", cv.scores}};
    }
    write_or_print(c.output_path, out.dump(2) + "\n");
    return 0;
}

int cmd_diagnose(const ExperimentConfig& c, const std::string& json_path) {
    DiagnoseReport rep;
    if (!c.tasks_path.empty()) {
        rep = diagnose(tasks_from(c), nullptr, c.xi);
    } else {
        SynthConfig cfg = c.synth;
        cfg.seed = c.seed;
        const auto prob = generate_problem(cfg);
        rep = diagnose(prob.dataset, &prob.population_covariances, c.xi);
    }
    std::cout << report_text(rep);
    if (!json_path.empty()) write_or_print(json_path, report_json(rep));
    else std::cout << report_json(rep);
    return 0;
}

int cmd_har(const ExperimentConfig& c) {
    auto ds = load_har_dir(c.data_dir);
    if (!ds) throw Error(ErrorCode::IoError, "no HAR data found under '" + c.data_dir + "'");
    std::cerr << "loaded " << ds->m() << " subjects, d = " << ds->d() << ", " << ds->total_samples() << " rows\n";
    const auto rep = diagnose(*ds, nullptr, c.xi);
    std::cerr << "B_emp = " << show(rep.b_emp) << "\n";
    const auto table = run_har(*ds, c);
    const std::string out = c.output_path.empty() ? "har." + c.format : c.output_path;
    emit_results(table, out, c.format, c);
    print_summary(table, true);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix-weighted multi-task regression: fits, sweeps and diagnostics"};
    app.set_version_flag("--version", MTLR_VERSION);
    app.require_subcommand(1);

    CommonArgs sweep_args, fit_args, cv_args, diag_args, har_args;
    std::string sweep_mode, diag_json;

    auto* sweep = app.add_subcommand("sweep", "synthetic sweep (sweep_delta, sweep_eps, sweep_alpha, sweep_balancedness)");
    add_common(sweep, sweep_args);
    sweep->add_option("--mode", sweep_mode, "which sweep to run");
    auto* fit = app.add_subcommand("fit", "fit methods at a fixed q on a task-tagged CSV");
    add_common(fit, fit_args);
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation of q on a task-tagged CSV");
    add_common(cv, cv_args);
    auto* diag = app.add_subcommand("diagnose", "per-task rank, operator norm, B_emp and nu");
    add_common(diag, diag_args);
    diag->add_option("--json", diag_json, "write the JSON report here instead of stdout");
    auto* har = app.add_subcommand("har", "multi-task logistic protocol on a local UCI HAR copy");
    add_common(har, har_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(resolve(sweep_args, std::nullopt, sweep_mode));
        if (fit->parsed()) return cmd_fit(resolve(fit_args, Mode::Fit, ""));
        if (cv->parsed()) return cmd_cv(resolve(cv_args, Mode::Cv, ""));
        if (diag->parsed()) return cmd_diagnose(resolve(diag_args, Mode::Diagnose, ""), diag_json);
        if (har->parsed()) return cmd_har(resolve(har_args, Mode::Har, ""));
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
