#include "mtlr/io.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mtlr/error.hpp"
#include "mtlr/spectral.hpp"

namespace mtlr {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t,") == std::string::npos) continue;
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::optional<double> to_number(const std::string& s) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

double number_or_throw(const std::string& s, const std::string& path, std::size_t row, std::size_t col) {
    const auto v = to_number(s);
    if (!v) {
        throw Error(ErrorCode::NonNumericField, path + ": row " + std::to_string(row + 1) + ", column " +
                                                    std::to_string(col + 1) + ": '" + s + "' is not a number");
    }
    return *v;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_num(double v) {
    if (!std::isfinite(v)) return "null";
    return num(v);
}

std::string opt_csv(const std::optional<double>& v) { return v ? num(*v) : std::string(); }
std::string opt_json(const std::optional<double>& v) { return v ? json_num(*v) : std::string("null"); }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
    f << text;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path);
}

MultiTaskDataset group_by_subject(std::vector<VectorXd>& rows, const std::vector<double>& labels,
                                  const std::vector<long long>& subjects) {
    std::map<long long, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < subjects.size(); ++i) groups[subjects[i]].push_back(i);
    MultiTaskDataset ds;
    ds.model_kind = ModelKind::Logistic;
    const Index d = rows.empty() ? 0 : rows.front().size();
    int id = 0;
    for (const auto& [subject, idx] : groups) {
        TaskDataset t;
        t.task_id = id++;
        t.design.resize(static_cast<Index>(idx.size()), d);
        t.responses.resize(static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            t.design.row(static_cast<Index>(k)) = rows[idx[k]].transpose();
            t.responses(static_cast<Index>(k)) = labels[idx[k]];
        }
        ds.tasks.push_back(std::move(t));
    }
    return ds;
}

} // namespace

MultiTaskDataset ingest_har_csv(const std::string& features_path, const std::string& labels_path,
                                const std::string& subjects_path, int standing_code) {
    const auto xl = read_lines(features_path);
    const auto yl = read_lines(labels_path);
    const auto sl = read_lines(subjects_path);
    if (xl.size() != yl.size() || xl.size() != sl.size()) {
        throw Error(ErrorCode::RowCountMismatch, "row counts differ: features " + std::to_string(xl.size()) +
                                                     ", labels " + std::to_string(yl.size()) + ", subjects " +
                                                     std::to_string(sl.size()));
    }
    std::vector<VectorXd> rows;
    std::vector<double> labels;
    std::vector<long long> subjects;
    std::size_t d = 0;
    for (std::size_t i = 0; i < xl.size(); ++i) {
        const auto tok = tokens(xl[i]);
        if (i == 0) d = tok.size();
        if (tok.size() != d) {
            throw Error(ErrorCode::DimensionMismatch, features_path + ": row " + std::to_string(i + 1) + " has " +
                                                          std::to_string(tok.size()) + " fields, expected " +
                                                          std::to_string(d));
        }
        VectorXd x(static_cast<Index>(d));
        for (std::size_t k = 0; k < d; ++k) x(static_cast<Index>(k)) = number_or_throw(tok[k], features_path, i, k);
        rows.push_back(std::move(x));

        const auto lt = tokens(yl[i]);
        if (lt.size() != 1) throw Error(ErrorCode::NonNumericField, labels_path + ": row " + std::to_string(i + 1) + ": expected one field");
        if (const auto v = to_number(lt[0])) {
            labels.push_back(*v == standing_code ? 1.0 : 0.0);
        } else {
            const std::string name = lower(lt[0]);
            labels.push_back(name == "standing" ? 1.0 : 0.0);
        }

        const auto st = tokens(sl[i]);
        const auto sv = st.size() == 1 ? to_number(st[0]) : std::nullopt;
        if (!sv || *sv != std::floor(*sv) || *sv < 0) {
            throw Error(ErrorCode::UnknownSubjectId,
                        subjects_path + ": row " + std::to_string(i + 1) + ": '" + sl[i] + "' is not a subject id");
        }
        subjects.push_back(static_cast<long long>(*sv));
    }
    auto ds = group_by_subject(rows, labels, subjects);
    validate_dataset(ds);
    return ds;
}

std::optional<MultiTaskDataset> load_har_dir(const std::string& dir) {
    const fs::path root(dir);
    if (dir.empty() || !fs::is_directory(root)) return std::nullopt;
    if (fs::exists(root / "X.txt") && fs::exists(root / "y.txt") && fs::exists(root / "subject.txt")) {
        return ingest_har_csv((root / "X.txt").string(), (root / "y.txt").string(), (root / "subject.txt").string());
    }
    std::vector<std::string> x, y, s;
    for (const char* part : {"train", "test"}) {
        const fs::path sub = root / part;
        const fs::path xp = sub / (std::string("X_") + part + ".txt");
        const fs::path yp = sub / (std::string("y_") + part + ".txt");
        const fs::path sp = sub / (std::string("subject_") + part + ".txt");
        if (!fs::exists(xp) || !fs::exists(yp) || !fs::exists(sp)) continue;
        for (const auto& l : read_lines(xp.string())) x.push_back(l);
        for (const auto& l : read_lines(yp.string())) y.push_back(l);
        for (const auto& l : read_lines(sp.string())) s.push_back(l);
    }
    if (x.empty()) return std::nullopt;
    // Stage the concatenation through temporary files so ingestion has one code path.
    const fs::path tmp = fs::temp_directory_path() / ("mtlr_har_" + std::to_string(std::hash<std::string>{}(dir)));
    fs::create_directories(tmp);
    auto dump = [&](const std::vector<std::string>& lines, const char* name) {
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        write_file((tmp / name).string(), text);
        return (tmp / name).string();
    };
    auto ds = ingest_har_csv(dump(x, "X.txt"), dump(y, "y.txt"), dump(s, "subject.txt"));
    std::error_code ec;
    fs::remove_all(tmp, ec);
    return ds;
}

MultiTaskDataset load_tasks_csv(const std::string& path, ModelKind kind) {
    const auto lines = read_lines(path);
    std::map<double, std::vector<std::pair<VectorXd, double>>> groups;
    std::size_t d = 0;
    bool first = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto tok = tokens(lines[i]);
        if (first && !tok.empty() && !to_number(tok[0])) {
            first = false;
            continue;  // header
        }
        first = false;
        if (tok.size() < 3) throw Error(ErrorCode::DimensionMismatch, path + ": row " + std::to_string(i + 1) + " needs task, y and at least one feature");
        if (d == 0) d = tok.size() - 2;
        if (tok.size() - 2 != d) throw Error(ErrorCode::InconsistentD, path + ": row " + std::to_string(i + 1) + " has a different feature count");
        const double task = number_or_throw(tok[0], path, i, 0);
        const double y = number_or_throw(tok[1], path, i, 1);
        VectorXd x(static_cast<Index>(d));
        for (std::size_t k = 0; k < d; ++k) x(static_cast<Index>(k)) = number_or_throw(tok[k + 2], path, i, k + 2);
        groups[task].emplace_back(std::move(x), y);
    }
    MultiTaskDataset ds;
    ds.model_kind = kind;
    int id = 0;
    for (const auto& [label, rows] : groups) {
        TaskDataset t;
        t.task_id = id++;
        t.design.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
        t.responses.resize(static_cast<Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            t.design.row(static_cast<Index>(k)) = rows[k].first.transpose();
            t.responses(static_cast<Index>(k)) = rows[k].second;
        }
        ds.tasks.push_back(std::move(t));
    }
    if (ds.tasks.empty()) throw Error(ErrorCode::IoError, path + ": no data rows");
    validate_dataset(ds);
    return ds;
}

std::string format_results(const MetricsTable& table, const std::string& format) {
    const auto& cols = metrics_columns();
    std::ostringstream out;
    if (format == "csv") {
        for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
        out << "\n";
        for (const auto& r : table.rows) {
            out << to_string(r.method) << ',' << num(r.sweep_value) << ',' << r.replicate << ',' << opt_csv(r.mse_all)
                << ',' << opt_csv(r.mse_related) << ',' << opt_csv(r.mse_outlier) << ',' << opt_csv(r.insample_all)
                << ',' << opt_csv(r.error_rate) << ',' << num(r.runtime_seconds) << ',' << opt_csv(r.chosen_q) << ','
                << (r.converged ? "true" : "false") << "\n";
        }
        return out.str();
    }
    if (format != "json") throw Error(ErrorCode::ConfigError, "unknown format " + format);
    out << "{\n  \"sweep\": " << nlohmann::json(table.sweep_name).dump() << ",\n  \"columns\": [";
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? ", " : "") << '"' << cols[c] << '"';
    out << "],\n  \"rows\": [";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        out << (i ? ",\n    " : "\n    ") << "{\"method\": \"" << to_string(r.method) << "\", \"sweep_value\": "
            << json_num(r.sweep_value) << ", \"replicate\": " << r.replicate << ", \"mse_all\": " << opt_json(r.mse_all)
            << ", \"mse_related\": " << opt_json(r.mse_related) << ", \"mse_outlier\": " << opt_json(r.mse_outlier)
            << ", \"insample_all\": " << opt_json(r.insample_all) << ", \"error_rate\": " << opt_json(r.error_rate)
            << ", \"runtime_seconds\": " << json_num(r.runtime_seconds) << ", \"chosen_q\": " << opt_json(r.chosen_q)
            << ", \"converged\": " << (r.converged ? "true" : "false") << "}";
    }
    out << (table.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
    return out.str();
}

std::string format_manifest(const ExperimentConfig& exp) {
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : exp.entries()) cfg[k] = v;
    nlohmann::ordered_json m;
    m["config"] = cfg;
    m["seed"] = exp.seed;
    m["version"] = MTLR_VERSION;
    m["timestamp_excluded_from_hash"] = true;
    return m.dump(2) + "\n";
}

std::string manifest_path(const std::string& results_path) { return results_path + ".manifest.json"; }

void emit_results(const MetricsTable& table, const std::string& path, const std::string& format,
                  const ExperimentConfig& exp) {
    write_file(path, format_results(table, format));
    write_file(manifest_path(path), format_manifest(exp));
}

std::map<std::string, std::string> manifest_overrides(const std::string& manifest_text) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(manifest_text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ConfigParseError, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!m.contains("config") || !m["config"].is_object()) {
        throw Error(ErrorCode::ConfigParseError, "manifest has no config object");
    }
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : m["config"].items()) {
        if (!v.is_string()) throw Error(ErrorCode::ConfigParseError, "manifest field '" + k + "' must be a string");
        if (v.get<std::string>().empty()) continue;
        out[k] = v.get<std::string>();
    }
    return out;
}

DiagnoseReport diagnose(const MultiTaskDataset& ds, const std::vector<MatrixXd>* population_covs, double xi) {
    validate_dataset(ds);
    const auto geoms = second_moments(ds);
    DiagnoseReport r;
    for (const auto& g : geoms) {
        r.ranks.push_back(static_cast<int>(g.rank()));
        r.op_norms.push_back(g.max_eigenvalue());
    }
    r.b_emp = balancedness_emp(geoms);
    if (population_covs) {
        for (std::size_t j = 0; j < geoms.size(); ++j) r.nu.push_back(comparability_nu(geoms[j], (*population_covs)[j]));
    }
    if (ds.model_kind == ModelKind::Logistic) r.curvature = realized_curvature_bounds(ds, GlmSpec::logistic(xi));
    return r;
}

std::string report_text(const DiagnoseReport& r) {
    std::ostringstream out;
    out << "task  rank  op_norm";
    if (!r.nu.empty()) out << "  nu";
    out << "\n";
    for (std::size_t j = 0; j < r.ranks.size(); ++j) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%4zu  %4d  %.6g", j, r.ranks[j], r.op_norms[j]);
        out << buf;
        if (!r.nu.empty()) out << "  " << (std::isfinite(r.nu[j]) ? num(r.nu[j]) : std::string("inf"));
        out << "\n";
    }
    out << "B_emp = " << (std::isfinite(r.b_emp) ? num(r.b_emp) : std::string("inf")) << "\n";
    if (r.curvature) {
        out << "curvature bounds on |z| <= " << num(r.curvature->predictor_radius) << ": [" << num(r.curvature->lower)
            << ", " << num(r.curvature->upper) << "]\n";
    }
    return out.str();
}

std::string report_json(const DiagnoseReport& r) {
    auto ext = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v)) return v;
        return "inf";
    };
    nlohmann::ordered_json j;
    j["ranks"] = r.ranks;
    j["op_norms"] = r.op_norms;
    j["b_emp"] = ext(r.b_emp);
    if (!r.nu.empty()) {
        nlohmann::ordered_json nu = nlohmann::ordered_json::array();
        for (double v : r.nu) nu.push_back(ext(v));
        j["nu"] = nu;
    }
    if (r.curvature) {
        j["curvature"] = {{"lower", r.curvature->lower}, {"upper", r.curvature->upper},
                          {"predictor_radius", r.curvature->predictor_radius}};
    }
    return j.dump(2) + "\n";
}

} // namespace mtlr
