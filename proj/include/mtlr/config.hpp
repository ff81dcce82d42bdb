#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtlr/model.hpp"
#include "mtlr/synthetic.hpp"

namespace mtlr {

enum class Method { Mtlr, Armul, Itl, Dp };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);
inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> v{Method::Mtlr, Method::Armul, Method::Itl, Method::Dp};
    return v;
}
inline bool needs_tuning(Method m) { return m == Method::Mtlr || m == Method::Armul; }

enum class Mode { SweepDelta, SweepEps, SweepAlpha, SweepBalancedness, Fit, Cv, Diagnose, Har };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);
inline bool is_sweep(Mode m) {
    return m == Mode::SweepDelta || m == Mode::SweepEps || m == Mode::SweepAlpha || m == Mode::SweepBalancedness;
}

struct ExperimentConfig {
    Mode mode = Mode::SweepDelta;
    SynthConfig synth;
    std::vector<double> sweep_values;
    std::vector<double> q_grid;
    int k_folds = 5;
    int reps = 30;
    std::uint64_t seed = 0;
    std::string output_path;
    std::string format = "csv";
    std::vector<Method> methods = all_methods();
    WeightScheme weights = WeightScheme::Equal;
    double xi = 10.0;
    int threads = 0;  // 0 = hardware concurrency
    bool record_runtime = false;  // off keeps output byte-identical across runs

    // real-data and file-input modes
    std::string data_dir;    // har: directory holding X, y, subject files
    std::string tasks_path;  // fit/cv/diagnose: task-tagged CSV
    bool logistic = false;
    bool standardize = false;
    double test_fraction = 0.2;
    double q = 1.0;  // fit mode

    /// Every knob as key=value text, in a fixed order (used for the manifest).
    std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Defaults for a mode: synthetic base values, sweep grid, q grid and reps.
ExperimentConfig default_config(Mode mode);

/// Parses `key=value` lines ('#' comments, blank lines allowed). Unknown keys throw UnknownKey,
/// malformed values throw ConfigParseError naming the line. Flag overrides are applied after
/// the file and win. `mode` may come from either source; it selects the defaults.
ExperimentConfig parse_config(const std::string& file_text, const std::map<std::string, std::string>& overrides = {});
ExperimentConfig parse_config_file(const std::string& path, const std::map<std::string, std::string>& overrides = {});

} // namespace mtlr
