#pragma once

// Instance generators and independent reference computations shared by the unit and
// acceptance tests. Nothing here calls into the solvers under test.

#include <functional>
#include <vector>

#include "mtlr/glm.hpp"
#include "mtlr/model.hpp"
#include "mtlr/rng.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr::testing {

inline VectorXd vec2(double a, double b) { return Eigen::Vector2d(a, b); }
inline VectorXd vec3(double a, double b, double c) { return Eigen::Vector3d(a, b, c); }

MatrixXd gaussian_matrix(Index rows, Index cols, Rng& rng);
VectorXd gaussian_vector(Index n, Rng& rng);

/// m tasks of n_j x d standard normal designs with y = X theta_j + noise_sd * z.
MultiTaskDataset random_linear(int m, int d, const std::vector<int>& n, Rng& rng, double noise_sd = 1.0,
                               std::vector<VectorXd>* thetas_out = nullptr);

/// Logistic labels drawn from Bernoulli(sigmoid(x^T theta_j)).
MultiTaskDataset random_logistic(int m, int d, int n, Rng& rng, double theta_scale = 1.0,
                                 std::vector<VectorXd>* thetas_out = nullptr);

/// (1/n) sum_i x_i x_i^T by explicit loops.
MatrixXd brute_second_moment(const MatrixXd& x);

/// Random PSD matrix of the given rank.
MatrixXd random_psd(int d, int rank, Rng& rng);

/// Literal sum_j w_j ((1/2n)||Y - X theta||^2 + lambda ||X (theta - beta)|| / sqrt(n)).
double reference_linear_objective(const MultiTaskDataset& ds, const Hyperparameters& hp,
                                  const std::vector<VectorXd>& thetas, const VectorXd& beta);

/// Literal logistic objective with the seminorm penalty (metric = Sigma) or Euclidean penalty.
double reference_glm_objective(const MultiTaskDataset& ds, const Hyperparameters& hp,
                               const std::vector<VectorXd>& thetas, const VectorXd& beta, bool euclidean = false);

/// Subgradient method on the linear objective in deviation coordinates v_j = theta_j - beta.
/// Deviation blocks take preconditioned subgradient steps with geometrically shrinking stage
/// lengths (restarting from the best point); beta takes damped preconditioned gradient steps.
/// Returns the best objective value found.
double subgradient_linear(const MultiTaskDataset& ds, const Hyperparameters& hp, long iterations);

/// Same scheme for the logistic objective, projecting every theta_j and beta onto B(0, xi).
double subgradient_glm(const MultiTaskDataset& ds, const Hyperparameters& hp, double xi, long iterations);

/// Golden-section minimizer of a unimodal function on [a, b].
double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-14);

/// Central finite-difference gradient.
VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h = 1e-6);

/// Unconstrained logistic MLE by Newton's method with step halving.
VectorXd newton_logistic(const MatrixXd& x, const VectorXd& y, int max_iters = 100);

} // namespace mtlr::testing
