#pragma once

#include <optional>
#include <vector>

#include "mtlr/task_data.hpp"

namespace mtlr {

/// How task weights w_j and penalty levels lambda_j are derived from q.
enum class WeightScheme {
    Equal,       // w_j = 1,   lambda_j = q sqrt(d / n_j)
    SampleSize,  // w_j = n_j, lambda_j = q sqrt(d) / sqrt(n_j)
};

struct Hyperparameters {
    double q = 1.0;
    std::vector<double> lambdas;
    std::vector<double> weights;
    double smoothing_floor = 1e-10;
    int max_iters = 10000;
    double rel_obj_tol = 1e-12;
    std::optional<double> xi;

    /// Fills lambdas/weights from q for the given dataset.
    static Hyperparameters from_schedule(const MultiTaskDataset& ds, double q,
                                         WeightScheme scheme = WeightScheme::Equal);

    /// Throws ConfigError when sizes or ranges are invalid for an m-task problem.
    void validate(Index m) const;
};

struct FitResult {
    std::vector<VectorXd> thetas;
    VectorXd beta;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> per_task_deviation_seminorm;
};

} // namespace mtlr
