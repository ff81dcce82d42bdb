#include "mtlr/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mtlr/error.hpp"

namespace mtlr {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == ';') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

// Source location for error messages: "line N" for file entries, "flag" for overrides.
struct Entry {
    std::string value;
    std::string where;
};

class Reader {
public:
    Reader(const std::string& key, const Entry& e) : key_(key), e_(e) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorCode::ConfigParseError, e_.where + ": field '" + key_ + "': " + why);
    }

    double real() const {
        const std::string s = trim(e_.value);
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail("expected a number, got '" + s + "'");
        return v;
    }

    long long integer() const {
        const std::string s = trim(e_.value);
        char* end = nullptr;
        errno = 0;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail("expected an integer, got '" + s + "'");
        return v;
    }

    std::uint64_t unsigned_integer() const {
        const std::string s = trim(e_.value);
        char* end = nullptr;
        errno = 0;
        if (!s.empty() && s[0] == '-') fail("expected a nonnegative integer");
        const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail("expected an integer, got '" + s + "'");
        return v;
    }

    bool boolean() const {
        const std::string s = trim(e_.value);
        if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
        if (s == "0" || s == "false" || s == "no" || s == "off") return false;
        fail("expected a boolean, got '" + s + "'");
    }

    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& tok : split_list(e_.value)) out.push_back(Reader(key_, {tok, e_.where}).real());
        return out;
    }

    std::string text() const { return trim(e_.value); }

private:
    std::string key_;
    Entry e_;
};

void apply(ExperimentConfig& c, const std::string& key, const Entry& e) {
    const Reader r(key, e);
    auto positive_int = [&]() {
        const auto v = r.integer();
        if (v < 1) r.fail("must be at least 1");
        return static_cast<int>(v);
    };
    if (key == "mode") return;  // consumed before defaults are chosen
    if (key == "n") c.synth.n = positive_int();
    else if (key == "m") c.synth.m = positive_int();
    else if (key == "d") c.synth.d = positive_int();
    else if (key == "delta") c.synth.delta = r.real();
    else if (key == "eps") c.synth.eps = r.real();
    else if (key == "alpha") c.synth.alpha = r.real();
    else if (key == "r_out") c.synth.r_out = r.real();
    else if (key == "noise_sd") c.synth.noise_sd = r.real();
    else if (key == "W") c.synth.W = r.real();
    else if (key == "sweep_values") c.sweep_values = r.reals();
    else if (key == "q_grid") c.q_grid = r.reals();
    else if (key == "k_folds") {
        const auto v = r.integer();
        if (v < 2) r.fail("must be at least 2");
        c.k_folds = static_cast<int>(v);
    } else if (key == "reps") c.reps = positive_int();
    else if (key == "seed") c.seed = r.unsigned_integer();
    else if (key == "output") c.output_path = r.text();
    else if (key == "format") {
        c.format = r.text();
        if (c.format != "csv" && c.format != "json") r.fail("expected csv or json");
    } else if (key == "methods") {
        c.methods.clear();
        for (const auto& tok : split_list(e.value)) {
            const auto mth = parse_method(tok);
            if (!mth) r.fail("unknown method '" + tok + "'");
            c.methods.push_back(*mth);
        }
        if (c.methods.empty()) r.fail("empty method list");
    } else if (key == "weights") {
        const auto s = r.text();
        if (s == "equal") c.weights = WeightScheme::Equal;
        else if (s == "sample_size") c.weights = WeightScheme::SampleSize;
        else r.fail("expected equal or sample_size");
    } else if (key == "xi") c.xi = r.real();
    else if (key == "threads") {
        const auto v = r.integer();
        if (v < 0) r.fail("must be nonnegative");
        c.threads = static_cast<int>(v);
    } else if (key == "record_runtime") c.record_runtime = r.boolean();
    else if (key == "data_dir") c.data_dir = r.text();
    else if (key == "tasks") c.tasks_path = r.text();
    else if (key == "logistic") c.logistic = r.boolean();
    else if (key == "standardize") c.standardize = r.boolean();
    else if (key == "test_fraction") c.test_fraction = r.real();
    else if (key == "q") c.q = r.real();
    else throw Error(ErrorCode::UnknownKey, e.where + ": unknown key '" + key + "'");
}

} // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Mtlr: return "mtlr";
        case Method::Armul: return "armul";
        case Method::Itl: return "itl";
        case Method::Dp: return "dp";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view s) {
    for (Method m : all_methods()) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::SweepDelta: return "sweep_delta";
        case Mode::SweepEps: return "sweep_eps";
        case Mode::SweepAlpha: return "sweep_alpha";
        case Mode::SweepBalancedness: return "sweep_balancedness";
        case Mode::Fit: return "fit";
        case Mode::Cv: return "cv";
        case Mode::Diagnose: return "diagnose";
        case Mode::Har: return "har";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
    for (Mode m : {Mode::SweepDelta, Mode::SweepEps, Mode::SweepAlpha, Mode::SweepBalancedness, Mode::Fit, Mode::Cv,
                   Mode::Diagnose, Mode::Har}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

ExperimentConfig default_config(Mode mode) {
    ExperimentConfig c;
    c.mode = mode;
    c.q_grid = {0.1, 0.4, 0.7, 1.0, 2.0, 4.0, 8.0, 16.0};
    switch (mode) {
        case Mode::SweepDelta:
            c.synth.eps = 0.1;
            c.synth.alpha = 1.0;
            c.sweep_values = {0.2, 0.4, 0.8, 1.6, 3.2};
            break;
        case Mode::SweepEps:
            c.synth.delta = 0.2;
            c.synth.alpha = 1.0;
            c.sweep_values = {0.05, 0.1, 0.2, 0.3, 0.4};
            break;
        case Mode::SweepAlpha:
            c.synth.delta = 0.2;
            c.synth.eps = 0.1;
            c.sweep_values = {0.0, 0.5, 1.0, 1.5, 2.0};
            break;
        case Mode::SweepBalancedness:
            c.synth = SynthConfig::spiked(5.0);
            c.sweep_values = {5.0, 10.0, 15.0, 20.0};
            break;
        case Mode::Har:
            c.q_grid = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
            c.weights = WeightScheme::SampleSize;
            c.logistic = true;
            break;
        case Mode::Fit:
        case Mode::Cv:
        case Mode::Diagnose:
            break;
    }
    return c;
}

ExperimentConfig parse_config(const std::string& file_text, const std::map<std::string, std::string>& overrides) {
    std::map<std::string, Entry> merged;
    std::istringstream in(file_text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        const std::string where = "line " + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigParseError, where + ": expected key=value, got '" + t + "'");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::ConfigParseError, where + ": empty key");
        merged[key] = {t.substr(eq + 1), where};
    }
    for (const auto& [k, v] : overrides) merged[k] = {v, "flag --" + k};

    Mode mode = Mode::SweepDelta;
    if (auto it = merged.find("mode"); it != merged.end()) {
        const auto m = parse_mode(trim(it->second.value));
        if (!m) {
            throw Error(ErrorCode::ConfigParseError,
                        it->second.where + ": field 'mode': unknown mode '" + trim(it->second.value) + "'");
        }
        mode = *m;
    }
    ExperimentConfig c = default_config(mode);
    for (const auto& [k, e] : merged) apply(c, k, e);

    if ((is_sweep(c.mode) || c.mode == Mode::Cv || c.mode == Mode::Har) && c.q_grid.empty()) {
        throw Error(ErrorCode::ConfigParseError, "field 'q_grid': must be nonempty");
    }
    for (double q : c.q_grid) {
        if (!(q >= 0.0) || !std::isfinite(q)) throw Error(ErrorCode::ConfigParseError, "field 'q_grid': entries must be finite and >= 0");
    }
    if (is_sweep(c.mode) && c.sweep_values.empty()) {
        throw Error(ErrorCode::ConfigParseError, "field 'sweep_values': must be nonempty");
    }
    if (!(c.xi > 0.0)) throw Error(ErrorCode::ConfigParseError, "field 'xi': must be positive");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
        throw Error(ErrorCode::ConfigParseError, "field 'test_fraction': must lie in (0, 1)");
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path, const std::map<std::string, std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> e;
    std::string ms;
    for (std::size_t i = 0; i < methods.size(); ++i) ms += (i ? "," : "") + std::string(to_string(methods[i]));
    e.emplace_back("mode", std::string(to_string(mode)));
    e.emplace_back("n", std::to_string(synth.n));
    e.emplace_back("m", std::to_string(synth.m));
    e.emplace_back("d", std::to_string(synth.d));
    e.emplace_back("delta", fmt(synth.delta));
    e.emplace_back("eps", fmt(synth.eps));
    e.emplace_back("alpha", fmt(synth.alpha));
    e.emplace_back("r_out", fmt(synth.r_out));
    e.emplace_back("noise_sd", fmt(synth.noise_sd));
    e.emplace_back("W", fmt(synth.W));
    e.emplace_back("sweep_values", join(sweep_values));
    e.emplace_back("q_grid", join(q_grid));
    e.emplace_back("k_folds", std::to_string(k_folds));
    e.emplace_back("reps", std::to_string(reps));
    e.emplace_back("seed", std::to_string(seed));
    e.emplace_back("format", format);
    e.emplace_back("methods", ms);
    e.emplace_back("weights", weights == WeightScheme::Equal ? "equal" : "sample_size");
    e.emplace_back("xi", fmt(xi));
    e.emplace_back("record_runtime", record_runtime ? "true" : "false");
    e.emplace_back("data_dir", data_dir);
    e.emplace_back("tasks", tasks_path);
    e.emplace_back("logistic", logistic ? "true" : "false");
    e.emplace_back("standardize", standardize ? "true" : "false");
    e.emplace_back("test_fraction", fmt(test_fraction));
    e.emplace_back("q", fmt(q));
    return e;
}

} // namespace mtlr
