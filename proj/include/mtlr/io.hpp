#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtlr/config.hpp"
#include "mtlr/evaluation.hpp"
#include "mtlr/glm.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

/// Three whitespace- or comma-delimited files with equal row counts. Labels may be numeric
/// activity codes (standing_code maps to 1) or activity names ("standing", any case).
/// Tasks are ordered by ascending subject id.
MultiTaskDataset ingest_har_csv(const std::string& features_path, const std::string& labels_path,
                                const std::string& subjects_path, int standing_code = 5);

/// UCI HAR directory: either train/ and test/ subfolders (X_*.txt, y_*.txt, subject_*.txt, concatenated)
/// or flat X.txt, y.txt, subject.txt. Returns nullopt when none of the layouts is present.
std::optional<MultiTaskDataset> load_har_dir(const std::string& dir);

/// Task-tagged CSV: each row "task,y,x_1,...,x_d"; an optional non-numeric header is skipped.
/// Tasks are ordered by ascending task label.
MultiTaskDataset load_tasks_csv(const std::string& path, ModelKind kind);

/// Serialized table; floats use 17 significant digits, missing values are empty (csv) or null (json).
std::string format_results(const MetricsTable& table, const std::string& format);
/// Manifest JSON: config entries, seed and tool version. No timestamp is written.
std::string format_manifest(const ExperimentConfig& exp);
std::string manifest_path(const std::string& results_path);

/// Writes the table and its manifest sidecar. Throws IoError.
void emit_results(const MetricsTable& table, const std::string& path, const std::string& format,
                  const ExperimentConfig& exp);

/// Config stored in a manifest, as key/value overrides suitable for parse_config.
std::map<std::string, std::string> manifest_overrides(const std::string& manifest_text);

struct DiagnoseReport {
    std::vector<int> ranks;
    std::vector<double> op_norms;
    double b_emp = 0.0;
    std::vector<double> nu;  // empty unless population covariances were supplied
    std::optional<CurvatureBounds> curvature;  // logistic datasets only
};

DiagnoseReport diagnose(const MultiTaskDataset& ds, const std::vector<MatrixXd>* population_covs = nullptr,
                        double xi = 10.0);
std::string report_text(const DiagnoseReport& r);
std::string report_json(const DiagnoseReport& r);

} // namespace mtlr
