#pragma once

#include <vector>

#include "mtlr/model.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

enum class LinearSolver {
    // Damped Newton on the exact profile beta -> sum_j w_j min_theta (f_j + lambda_j ||theta - beta||).
    Profile,
    // Alternating closed-form theta-steps and smoothed Weiszfeld beta-steps. Can stall at a
    // consensus point that is not optimal: once every task snaps to beta the Weiszfeld step
    // only sees zero deviations and stops moving beta.
    BlockCoordinate,
    // L-BFGS on the jointly smoothed objective (cross-check only).
    SmoothedLbfgs,
};

struct LinearFitOptions {
    LinearSolver solver = LinearSolver::Profile;
};

/// (1/(2n)) ||Y - X theta||^2.
double linear_task_loss(const TaskDataset& task, const VectorXd& theta);

/// sum_j w_j ((1/(2 n_j)) ||Y_j - X_j theta_j||^2 + lambda_j ||theta_j - beta||_{Sigma_j}), exact seminorm.
double mtlr_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                      const VectorXd& beta);

/// Minimum-norm least-squares solution; zero on Null(Sigma_j).
VectorXd whitened_ols(const TaskDataset& task);
VectorXd whitened_ols(const TaskDataset& task, const TaskGeometry& geom);

/// Exact minimizer of (1/2)||theta - ols||^2_Sigma + lambda ||theta - beta||_Sigma with the
/// deviation from beta set to zero on Null(Sigma).
VectorXd theta_step_linear(const TaskGeometry& geom, const VectorXd& ols, const VectorXd& beta, double lambda);

/// Smoothed Weiszfeld iteration for min_beta sum_j w_j lambda_j ||theta_j - beta||_{Sigma_j},
/// started from `beta_prev`. Returns `beta_prev` when every w_j lambda_j Sigma_j vanishes.
VectorXd beta_step(const std::vector<TaskGeometry>& geoms, const std::vector<VectorXd>& thetas,
                   const Hyperparameters& hp, const VectorXd& beta_prev);

struct SmoothedGradient {
    std::vector<VectorXd> thetas;
    VectorXd beta;
};

/// Objective with ||v||_Sigma replaced by sqrt(v^T Sigma v + eps^2), eps = hp.smoothing_floor.
double smoothed_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                          const VectorXd& beta);

SmoothedGradient smoothed_gradient(const MultiTaskDataset& ds, const Hyperparameters& hp,
                                   const std::vector<VectorXd>& thetas, const VectorXd& beta);

FitResult fit_mtlr_linear(const MultiTaskDataset& ds, const Hyperparameters& hp, const LinearFitOptions& opts = {});

/// Same, reusing precomputed per-task geometry.
FitResult fit_mtlr_linear(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                          const Hyperparameters& hp, const LinearFitOptions& opts = {});

/// Initial center: per-task OLS averaged with weights w_j n_j.
VectorXd initial_center(const MultiTaskDataset& ds, const std::vector<VectorXd>& ols, const Hyperparameters& hp);

} // namespace mtlr
