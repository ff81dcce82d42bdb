#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "mtlr/error.hpp"

namespace mtlr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ModelKind { Linear, Logistic };

/// One task's samples: design is n_j x d, responses has length n_j.
struct TaskDataset {
    MatrixXd design;
    VectorXd responses;
    int task_id = 0;

    Index n() const { return design.rows(); }
    Index d() const { return design.cols(); }
};

struct MultiTaskDataset {
    std::vector<TaskDataset> tasks;
    ModelKind model_kind = ModelKind::Linear;

    Index m() const { return static_cast<Index>(tasks.size()); }
    Index d() const { return tasks.empty() ? 0 : tasks.front().d(); }
    Index total_samples() const;
};

/// Throws mtlr::Error naming the first offending task and field.
void validate_dataset(const MultiTaskDataset& ds);

/// Empirical second moment (1/n) X^T X with a cached, nonincreasing eigendecomposition.
/// Immutable after construction.
class TaskGeometry {
public:
    static constexpr double kRankTol = 1e-10;

    TaskGeometry() = default;

    /// Builds from a PSD matrix; `sample_count` is the n_j the matrix was averaged over
    /// (0 when the matrix did not come from data, e.g. a population covariance).
    static TaskGeometry from_matrix(const MatrixXd& sigma, Index sample_count = 0);

    const MatrixXd& sigma() const { return sigma_; }
    const VectorXd& eigenvalues() const { return eigenvalues_; }
    const MatrixXd& eigenvectors() const { return eigenvectors_; }
    Index rank() const { return rank_; }
    Index dim() const { return sigma_.rows(); }
    Index sample_count() const { return sample_count_; }
    double max_eigenvalue() const { return eigenvalues_.size() ? eigenvalues_(0) : 0.0; }

    /// Leading `rank()` eigenvectors (d x r).
    auto range_basis() const { return eigenvectors_.leftCols(rank_); }
    auto range_eigenvalues() const { return eigenvalues_.head(rank_); }

    /// Orthogonal projection of v onto Range(sigma).
    VectorXd project_range(const VectorXd& v) const;

    /// Coordinates of Sigma^{1/2} v in the range eigenbasis (length r).
    VectorXd whiten(const VectorXd& v) const;

    /// Sigma^{dagger/2} g in range coordinates (length r); g should lie in the range.
    VectorXd whiten_dual(const VectorXd& g) const;

private:
    MatrixXd sigma_;
    VectorXd eigenvalues_;
    MatrixXd eigenvectors_;
    Index rank_ = 0;
    Index sample_count_ = 0;
};

TaskGeometry second_moment(const TaskDataset& task);

std::vector<TaskGeometry> second_moments(const MultiTaskDataset& ds);

/// sqrt(max(0, v^T Sigma v)).
double seminorm(const TaskGeometry& geom, const VectorXd& v);

/// Same quantity for a raw PSD matrix.
double seminorm(const MatrixXd& sigma, const VectorXd& v);

} // namespace mtlr
