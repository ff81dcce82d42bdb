#pragma once

#include <vector>

#include "mtlr/task_data.hpp"

namespace mtlr {

/// Square-root factors of a PSD matrix restricted to its range (r = rank).
struct WhitenedBasis {
    MatrixXd half;              // d x r, Q_r diag(sqrt(lambda_r))
    MatrixXd half_pinv;         // r x d, diag(1/sqrt(lambda_r)) Q_r^T
    MatrixXd range_projector;   // d x d, Q_r Q_r^T
};

WhitenedBasis whitened_basis(const TaskGeometry& geom);

/// Relative eigenmass leakage allowed before two ranges are declared different.
inline constexpr double kRangeLeakageTol = 1e-8;

/// max_j lambda_max(A^{dagger/2} S_j A^{dagger/2}) with A the average of all S_j.
/// Returns +inf when some S_j has mass outside Range(A).
double balancedness_emp(const std::vector<TaskGeometry>& geoms);

/// Balancedness of every matrix in `covs` against the average of the subset
/// selected by `reference_mask` (e.g. the inlier set S). Same +inf convention.
double balancedness_against(const std::vector<MatrixXd>& covs, const std::vector<bool>& reference_mask);

/// Balancedness of a family of PSD matrices against their own average.
double balancedness(const std::vector<MatrixXd>& covs);

/// Smallest nu with nu^{-1} S <= P <= nu S (S empirical, P population); +inf on range mismatch.
double comparability_nu(const TaskGeometry& empirical, const MatrixXd& population);

/// Minimizer of ||p - theta||_Sigma over the Euclidean ball ||p||_2 <= xi; seminorm ties are
/// broken toward the smallest Euclidean distance to theta.
VectorXd seminorm_ball_project(const TaskGeometry& geom, const VectorXd& theta, double xi);

/// Euclidean projection onto the ball of radius xi.
VectorXd ball_project(const VectorXd& v, double xi);

/// Fraction of tr(S) lying outside Range(basis), where basis has orthonormal columns.
double range_leakage(const MatrixXd& s, const MatrixXd& basis);

} // namespace mtlr
