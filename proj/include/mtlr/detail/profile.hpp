#pragma once

// Shared machinery for linear-model estimators whose task penalty is either the
// Sigma_j seminorm (MTLR) or the Euclidean norm (ARMUL). Both reduce to minimizing
// a C^1 convex profile in beta whose Hessian is dominated by sum_j w_j Sigma_j.

#include <vector>

#include "mtlr/task_data.hpp"

namespace mtlr::detail {

enum class PenaltyMetric { Seminorm, Euclidean };

struct ProfileTask {
    const TaskGeometry* geom = nullptr;
    VectorXd ols;
    double weight = 1.0;
    double lambda = 0.0;
};

struct TaskEnvelope {
    double value = 0.0;  // min_theta (1/2)||theta - ols||^2_Sigma + lambda * penalty(theta - beta)
    VectorXd grad;
    MatrixXd hess;
    VectorXd theta;
};

TaskEnvelope evaluate_envelope(const ProfileTask& task, const VectorXd& beta, PenaltyMetric metric, bool want_hess);

/// Exact minimizer of (1/2)||theta - ols||^2_Sigma + lambda ||theta - beta||_2.
VectorXd armul_theta_step(const TaskGeometry& geom, const VectorXd& ols, const VectorXd& beta, double lambda);

struct ProfileSolution {
    VectorXd beta;
    std::vector<VectorXd> thetas;
    std::vector<double> history;  // profile value after each accepted step (including start)
    int iterations = 0;
    bool converged = false;
};

ProfileSolution minimize_profile(const std::vector<ProfileTask>& tasks, VectorXd beta0, PenaltyMetric metric,
                                 int max_iters, double rel_tol);

} // namespace mtlr::detail
