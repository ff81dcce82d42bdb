#include "mtlr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtlr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_max_sym(const MatrixXd& a) {
    if (a.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

// Balancedness of each matrix in `covs` against `reference`.
double balancedness_vs(const std::vector<const MatrixXd*>& covs, const MatrixXd& reference) {
    const auto ref = TaskGeometry::from_matrix(reference);
    const MatrixXd basis = ref.range_basis();
    const VectorXd inv_sqrt = ref.range_eigenvalues().cwiseSqrt().cwiseInverse();
    double best = 0.0;
    for (const MatrixXd* s : covs) {
        if (range_leakage(*s, basis) > kRangeLeakageTol) return kInf;
        const MatrixXd w = inv_sqrt.asDiagonal() * (basis.transpose() * (*s) * basis) * inv_sqrt.asDiagonal();
        best = std::max(best, lambda_max_sym(w));
    }
    return best;
}

} // namespace

double range_leakage(const MatrixXd& s, const MatrixXd& basis) {
    const double total = s.trace();
    if (total <= 0.0) return 0.0;
    const double inside = (basis.transpose() * s * basis).trace();
    return std::max(0.0, total - inside) / total;
}

WhitenedBasis whitened_basis(const TaskGeometry& geom) {
    WhitenedBasis wb;
    const auto basis = geom.range_basis();
    const VectorXd root = geom.range_eigenvalues().cwiseSqrt();
    wb.half = basis * root.asDiagonal();
    wb.half_pinv = root.cwiseInverse().asDiagonal() * basis.transpose();
    wb.range_projector = basis * basis.transpose();
    return wb;
}

double balancedness_emp(const std::vector<TaskGeometry>& geoms) {
    std::vector<MatrixXd> covs;
    covs.reserve(geoms.size());
    for (const auto& g : geoms) covs.push_back(g.sigma());
    return balancedness(covs);
}

double balancedness(const std::vector<MatrixXd>& covs) {
    return balancedness_against(covs, std::vector<bool>(covs.size(), true));
}

double balancedness_against(const std::vector<MatrixXd>& covs, const std::vector<bool>& reference_mask) {
    if (covs.empty() || reference_mask.size() != covs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "balancedness needs one mask entry per matrix");
    }
    const Index d = covs.front().rows();
    MatrixXd avg = MatrixXd::Zero(d, d);
    int count = 0;
    for (std::size_t j = 0; j < covs.size(); ++j) {
        if (covs[j].rows() != d || covs[j].cols() != d) {
            throw Error(ErrorCode::InconsistentD, "balancedness: matrices disagree on d");
        }
        if (reference_mask[j]) {
            avg += covs[j];
            ++count;
        }
    }
    if (count == 0) throw Error(ErrorCode::DimensionMismatch, "balancedness: empty reference set");
    avg /= static_cast<double>(count);
    std::vector<const MatrixXd*> ptrs;
    for (const auto& c : covs) ptrs.push_back(&c);
    return balancedness_vs(ptrs, avg);
}

double comparability_nu(const TaskGeometry& empirical, const MatrixXd& population) {
    const auto pop = TaskGeometry::from_matrix(population);
    if (pop.rank() != empirical.rank()) return kInf;
    if (pop.rank() == 0) return 1.0;
    const MatrixXd pop_basis = pop.range_basis();
    const MatrixXd emp_basis = empirical.range_basis();
    if (range_leakage(empirical.sigma(), pop_basis) > kRangeLeakageTol ||
        range_leakage(pop.sigma(), emp_basis) > kRangeLeakageTol) {
        return kInf;
    }
    const VectorXd inv_sqrt = pop.range_eigenvalues().cwiseSqrt().cwiseInverse();
    const MatrixXd w =
        inv_sqrt.asDiagonal() * (pop_basis.transpose() * empirical.sigma() * pop_basis) * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0) return kInf;
    return std::max({hi, 1.0 / lo, 1.0});
}

VectorXd ball_project(const VectorXd& v, double xi) {
    const double norm = v.norm();
    if (norm <= xi) return v;
    return v * (xi / norm);
}

VectorXd seminorm_ball_project(const TaskGeometry& geom, const VectorXd& theta, double xi) {
    if (!(xi > 0.0)) throw Error(ErrorCode::ConfigError, "seminorm_ball_project: xi must be positive");
    if (theta.norm() <= xi) return theta;

    const auto basis = geom.range_basis();
    const VectorXd coords = basis.transpose() * theta;
    const VectorXd range_part = basis * coords;
    const VectorXd null_part = theta - range_part;
    const double range_norm = coords.norm();

    if (range_norm <= xi) {
        // Seminorm objective is zero at the range part; spend the remaining radius on the
        // null-space part, shrunk toward zero.
        const double budget = std::sqrt(std::max(0.0, xi * xi - range_norm * range_norm));
        const double null_norm = null_part.norm();
        if (null_norm <= budget) return theta;
        return range_part + null_part * (budget / null_norm);
    }

    // Null part is zero; range part is (Sigma + mu I)^{-1} Sigma theta_r with ||.|| = xi.
    const VectorXd ev = geom.range_eigenvalues();
    auto shrunk_norm = [&](double mu) {
        return (ev.array() * coords.array() / (ev.array() + mu)).matrix().norm();
    };
    double lo = 0.0;
    double hi = ev.maxCoeff() * range_norm / xi;
    while (shrunk_norm(hi) > xi) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (shrunk_norm(mid) > xi) lo = mid; else hi = mid;
    }
    const VectorXd a = (ev.array() * coords.array() / (ev.array() + hi)).matrix();
    return basis * a;
}

} // namespace mtlr
