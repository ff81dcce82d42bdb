#pragma once

#include <vector>

#include "mtlr/glm.hpp"
#include "mtlr/model.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

// For logistic datasets `spec` selects the family and radius; nullptr means GlmSpec::logistic().
// Linear datasets ignore it.

/// Independent-task learning. beta is the unweighted mean of the per-task fits (reported only).
FitResult fit_itl(const MultiTaskDataset& ds, const GlmSpec* spec = nullptr);

/// Data pooling: one parameter fit on all samples; every theta equals beta.
FitResult fit_dp(const MultiTaskDataset& ds, const GlmSpec* spec = nullptr);

/// sum_j w_j (f_j(theta_j) + lambda_j ||theta_j - beta||_2).
double armul_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                       const VectorXd& beta, const GlmSpec* spec = nullptr);

FitResult fit_armul(const MultiTaskDataset& ds, const Hyperparameters& hp, const GlmSpec* spec = nullptr);
FitResult fit_armul(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, const Hyperparameters& hp,
                    const GlmSpec* spec = nullptr);

} // namespace mtlr
