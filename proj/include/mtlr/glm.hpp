#pragma once

#include <optional>
#include <vector>

#include "mtlr/model.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

struct CurvatureBounds {
    double lower = 0.0;  // alpha_l: min psi'' over the realized predictor interval
    double upper = 0.0;  // alpha_u: max psi'' over the same interval
    double predictor_radius = 0.0;  // interval is [-radius, radius]
};

/// Exponential-family description. Only the logistic family ships built in.
struct GlmSpec {
    using ScalarFn = double (*)(double);
    ScalarFn psi = nullptr;        // cumulant function
    ScalarFn link = nullptr;       // m(z) = psi'(z)
    ScalarFn curvature = nullptr;  // psi''(z)
    double xi = 10.0;              // ball radius of the parameter domain
    double curvature_max = 0.25;   // sup_z psi''(z), used for step-size initialization
    std::optional<CurvatureBounds> curvature_bounds;

    static GlmSpec logistic(double xi = 10.0);
};

/// alpha_l / alpha_u of psi'' over {x^T theta : ||theta|| <= xi, x a realized covariate row}.
CurvatureBounds realized_curvature_bounds(const MultiTaskDataset& ds, const GlmSpec& spec);

struct LossGrad {
    double loss = 0.0;
    VectorXd grad;
};

/// loss = (1/n) sum_i (psi(x_i^T theta) - y_i x_i^T theta), grad = (1/n) sum_i (m(x_i^T theta) - y_i) x_i.
LossGrad glm_loss_grad(const TaskDataset& task, const GlmSpec& spec, const VectorXd& theta);
double glm_loss(const TaskDataset& task, const GlmSpec& spec, const VectorXd& theta);

/// sum_j w_j (f_j(theta_j) + lambda_j ||theta_j - beta||_{Sigma_j}) with the exact seminorm.
double glm_mtlr_objective(const MultiTaskDataset& ds, const GlmSpec& spec, const Hyperparameters& hp,
                          const std::vector<VectorXd>& thetas, const VectorXd& beta);

struct GlmThetaStep {
    VectorXd theta;
    bool converged = false;
    int iterations = 0;
    double kkt_residual = 0.0;
};

/// Approximate minimizer of f(theta) + lambda ||theta - beta||_Sigma over ||theta|| <= xi.
/// Returns beta itself when the whitened gradient at beta is within lambda.
GlmThetaStep theta_step_glm(const TaskDataset& task, const GlmSpec& spec, const TaskGeometry& geom,
                            const VectorXd& beta, double lambda, const Hyperparameters& hp);

/// Ball-constrained maximum likelihood for a single task.
VectorXd constrained_mle(const TaskDataset& task, const GlmSpec& spec);

FitResult fit_mtlr_glm(const MultiTaskDataset& ds, const GlmSpec& spec, const Hyperparameters& hp);
FitResult fit_mtlr_glm(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, const GlmSpec& spec,
                       const Hyperparameters& hp);

namespace detail {

enum class PenaltyMetric;

/// Joint solver shared by MTLR and ARMUL for GLM losses.
FitResult fit_penalized_glm(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                            const GlmSpec& spec, const Hyperparameters& hp, PenaltyMetric metric);

} // namespace detail

} // namespace mtlr
