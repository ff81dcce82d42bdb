#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtlr/config.hpp"
#include "mtlr/glm.hpp"
#include "mtlr/model.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

/// ||theta_hat - theta_star||^2_Sigma.
double in_sample_mse(const TaskGeometry& geom, const VectorXd& theta_hat, const VectorXd& theta_star);

/// (theta_hat - theta_star)^T cov (theta_hat - theta_star).
double population_mse(const MatrixXd& population_cov, const VectorXd& theta_hat, const VectorXd& theta_star);

/// Fraction of rows where 1{m(x^T theta) >= 0.5} differs from the label.
double classification_error(const GlmSpec& spec, const VectorXd& theta, const MatrixXd& design, const VectorXd& labels);

/// Fits one method at multiplier q (ignored by ITL/DP). `spec` is used for logistic datasets.
FitResult fit_method(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, Method method, double q,
                     WeightScheme scheme, const GlmSpec& spec);

struct CvResult {
    double q_best = 0.0;
    std::vector<double> scores;  // mean held-out loss per grid entry
};

/// Per-task row indices of fold f: each task's indices are shuffled with a seeded stream and cut
/// into k contiguous blocks.
std::vector<std::vector<std::vector<int>>> per_task_folds(const MultiTaskDataset& ds, int k, std::uint64_t seed);

/// Mean over tasks of the held-out loss (squared error or logistic negative log-likelihood) on `rows`.
double held_out_score(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows,
                      const std::vector<VectorXd>& thetas, const GlmSpec& spec);

/// Keeps only the listed rows of each task.
MultiTaskDataset subset_rows(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows);
/// Row indices of each task that are not in `rows`.
std::vector<std::vector<int>> complement_rows(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows);

CvResult kfold_cv_q(const MultiTaskDataset& ds, Method method, const std::vector<double>& q_grid, int k,
                    std::uint64_t seed, WeightScheme scheme = WeightScheme::Equal,
                    const GlmSpec& spec = GlmSpec::logistic());

struct MetricsRow {
    Method method = Method::Mtlr;
    double sweep_value = 0.0;
    int replicate = 0;
    std::optional<double> mse_all;
    std::optional<double> mse_related;
    std::optional<double> mse_outlier;
    std::optional<double> insample_all;
    std::optional<double> error_rate;
    double runtime_seconds = 0.0;
    std::optional<double> chosen_q;
    bool converged = true;
};

struct MetricsTable {
    std::string sweep_name;
    std::vector<MetricsRow> rows;
};

/// Column names in output order.
const std::vector<std::string>& metrics_columns();

struct SplitMse {
    double all = 0.0;
    std::optional<double> related;
    std::optional<double> outlier;
};

/// Unweighted means of per-task population MSE over all, inlier and outlier tasks.
/// An empty split yields nullopt.
SplitMse split_mse(const std::vector<double>& per_task, const std::vector<bool>& inlier_mask);

/// Runs a synthetic sweep. Rows are ordered by (method, sweep_value, replicate) whatever the thread count.
MetricsTable run_sweep(const ExperimentConfig& exp);

/// Per-task test rows for split `s`: the first ceil(test_fraction * n_j) of a seeded shuffle.
std::vector<std::vector<int>> test_split(const MultiTaskDataset& ds, double test_fraction, std::uint64_t seed,
                                         int split);

/// Feature-wise standardization fitted on the training rows only.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;
    static Standardizer fit(const MultiTaskDataset& train);
    void apply(MultiTaskDataset& ds) const;
};

/// Real-data logistic protocol on a prepared dataset: per split, hold out test rows, CV-tune q for
/// MTLR/ARMUL on the rest, refit, record the mean of per-task test error rates.
MetricsTable run_har(const MultiTaskDataset& ds, const ExperimentConfig& exp);

} // namespace mtlr
