#include "mtlr/task_data.hpp"

#include <cmath>
#include <string>

namespace mtlr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InconsistentD: return "InconsistentD";
        case ErrorCode::NonBinaryLabel: return "NonBinaryLabel";
        case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ConfigParseError: return "ConfigParseError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::RowCountMismatch: return "RowCountMismatch";
        case ErrorCode::UnknownSubjectId: return "UnknownSubjectId";
        case ErrorCode::NonNumericField: return "NonNumericField";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Index MultiTaskDataset::total_samples() const {
    Index total = 0;
    for (const auto& t : tasks) total += t.n();
    return total;
}

void validate_dataset(const MultiTaskDataset& ds) {
    if (ds.tasks.empty()) {
        throw Error(ErrorCode::DimensionMismatch, "dataset has no tasks");
    }
    const Index d = ds.tasks.front().d();
    for (std::size_t j = 0; j < ds.tasks.size(); ++j) {
        const auto& t = ds.tasks[j];
        const std::string where = "task " + std::to_string(j);
        if (t.n() < 1 || t.d() < 1) {
            throw Error(ErrorCode::DimensionMismatch, where + ": design must have n >= 1 rows and d >= 1 columns");
        }
        if (t.design.rows() != t.responses.size()) {
            throw Error(ErrorCode::DimensionMismatch,
                        where + ": design has " + std::to_string(t.design.rows()) + " rows but responses has " +
                            std::to_string(t.responses.size()) + " entries");
        }
        if (t.d() != d) {
            throw Error(ErrorCode::InconsistentD,
                        where + ": d = " + std::to_string(t.d()) + " but task 0 has d = " + std::to_string(d));
        }
        if (!t.design.allFinite()) {
            throw Error(ErrorCode::NonFiniteEntry, where + ": design");
        }
        if (!t.responses.allFinite()) {
            throw Error(ErrorCode::NonFiniteEntry, where + ": responses");
        }
        if (ds.model_kind == ModelKind::Logistic) {
            for (Index i = 0; i < t.responses.size(); ++i) {
                const double y = t.responses(i);
                if (y != 0.0 && y != 1.0) {
                    throw Error(ErrorCode::NonBinaryLabel,
                                where + ": responses[" + std::to_string(i) + "] = " + std::to_string(y));
                }
            }
        }
    }
}

TaskGeometry TaskGeometry::from_matrix(const MatrixXd& sigma, Index sample_count) {
    if (sigma.rows() != sigma.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "second moment matrix must be square");
    }
    if (!sigma.allFinite()) {
        throw Error(ErrorCode::NonFiniteEntry, "second moment matrix");
    }
    TaskGeometry g;
    g.sample_count_ = sample_count;
    g.sigma_ = 0.5 * (sigma + sigma.transpose());

    const Index d = sigma.rows();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g.sigma_);
    // Eigen returns ascending order; store nonincreasing.
    g.eigenvalues_ = eig.eigenvalues().reverse();
    g.eigenvectors_ = eig.eigenvectors().rowwise().reverse();
    for (Index k = 0; k < d; ++k) {
        if (g.eigenvalues_(k) < 0.0) g.eigenvalues_(k) = 0.0;
    }
    const double top = d > 0 ? g.eigenvalues_(0) : 0.0;
    g.rank_ = 0;
    for (Index k = 0; k < d; ++k) {
        if (g.eigenvalues_(k) > kRankTol * top && g.eigenvalues_(k) > 0.0) ++g.rank_;
    }
    return g;
}

VectorXd TaskGeometry::project_range(const VectorXd& v) const {
    const auto basis = range_basis();
    return basis * (basis.transpose() * v);
}

VectorXd TaskGeometry::whiten(const VectorXd& v) const {
    return range_eigenvalues().cwiseSqrt().cwiseProduct(range_basis().transpose() * v);
}

VectorXd TaskGeometry::whiten_dual(const VectorXd& g) const {
    return (range_basis().transpose() * g).cwiseQuotient(range_eigenvalues().cwiseSqrt());
}

TaskGeometry second_moment(const TaskDataset& task) {
    const double n = static_cast<double>(task.n());
    MatrixXd sigma = (task.design.transpose() * task.design) / n;
    return TaskGeometry::from_matrix(sigma, task.n());
}

std::vector<TaskGeometry> second_moments(const MultiTaskDataset& ds) {
    std::vector<TaskGeometry> out;
    out.reserve(ds.tasks.size());
    for (const auto& t : ds.tasks) out.push_back(second_moment(t));
    return out;
}

double seminorm(const MatrixXd& sigma, const VectorXd& v) {
    const double q = v.dot(sigma * v);
    return std::sqrt(std::max(0.0, q));
}

double seminorm(const TaskGeometry& geom, const VectorXd& v) { return seminorm(geom.sigma(), v); }

} // namespace mtlr
