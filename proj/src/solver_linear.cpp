#include "mtlr/solver_linear.hpp"

#include <cmath>

#include "mtlr/detail/profile.hpp"
#include "mtlr/optim.hpp"

namespace mtlr {

namespace {

void check_shapes(const MultiTaskDataset& ds, const std::vector<VectorXd>& thetas, const VectorXd& beta) {
    if (static_cast<Index>(thetas.size()) != ds.m()) {
        throw Error(ErrorCode::DimensionMismatch, "expected one theta per task");
    }
    for (const auto& t : thetas) {
        if (t.size() != ds.d()) throw Error(ErrorCode::DimensionMismatch, "theta length must equal d");
    }
    if (beta.size() != ds.d()) throw Error(ErrorCode::DimensionMismatch, "beta length must equal d");
}

// (1/sqrt(n)) ||X v||, identical to ||v||_Sigma for Sigma = X^T X / n.
double prediction_seminorm(const TaskDataset& task, const VectorXd& v) {
    return (task.design * v).norm() / std::sqrt(static_cast<double>(task.n()));
}

} // namespace

Hyperparameters Hyperparameters::from_schedule(const MultiTaskDataset& ds, double q, WeightScheme scheme) {
    Hyperparameters hp;
    hp.q = q;
    const double d = static_cast<double>(ds.d());
    for (const auto& t : ds.tasks) {
        const double n = static_cast<double>(t.n());
        hp.lambdas.push_back(q * std::sqrt(d / n));
        hp.weights.push_back(scheme == WeightScheme::Equal ? 1.0 : n);
    }
    return hp;
}

void Hyperparameters::validate(Index m) const {
    if (static_cast<Index>(lambdas.size()) != m || static_cast<Index>(weights.size()) != m) {
        throw Error(ErrorCode::ConfigError, "hyperparameters need one lambda and one weight per task");
    }
    for (Index j = 0; j < m; ++j) {
        if (!std::isfinite(lambdas[j]) || lambdas[j] < 0.0) {
            throw Error(ErrorCode::ConfigError, "lambda_" + std::to_string(j) + " must be finite and >= 0");
        }
        if (!(weights[j] > 0.0) || !std::isfinite(weights[j])) {
            throw Error(ErrorCode::ConfigError, "w_" + std::to_string(j) + " must be positive");
        }
    }
    if (!(smoothing_floor >= 0.0)) throw Error(ErrorCode::ConfigError, "smoothing floor must be >= 0");
    if (max_iters < 1) throw Error(ErrorCode::ConfigError, "max_iters must be >= 1");
    if (xi && !(*xi > 0.0)) throw Error(ErrorCode::ConfigError, "xi must be positive");
}

double linear_task_loss(const TaskDataset& task, const VectorXd& theta) {
    return 0.5 * (task.responses - task.design * theta).squaredNorm() / static_cast<double>(task.n());
}

double mtlr_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                      const VectorXd& beta) {
    check_shapes(ds, thetas, beta);
    double total = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        const auto& task = ds.tasks[j];
        total += hp.weights[j] *
                 (linear_task_loss(task, thetas[j]) + hp.lambdas[j] * prediction_seminorm(task, thetas[j] - beta));
    }
    return total;
}

VectorXd whitened_ols(const TaskDataset& task, const TaskGeometry& geom) {
    const VectorXd moment = task.design.transpose() * task.responses / static_cast<double>(task.n());
    const auto basis = geom.range_basis();
    return basis * (basis.transpose() * moment).cwiseQuotient(geom.range_eigenvalues());
}

VectorXd whitened_ols(const TaskDataset& task) { return whitened_ols(task, second_moment(task)); }

VectorXd theta_step_linear(const TaskGeometry& geom, const VectorXd& ols, const VectorXd& beta, double lambda) {
    detail::ProfileTask t{&geom, ols, 1.0, lambda};
    return detail::evaluate_envelope(t, beta, detail::PenaltyMetric::Seminorm, false).theta;
}

VectorXd beta_step(const std::vector<TaskGeometry>& geoms, const std::vector<VectorXd>& thetas,
                   const Hyperparameters& hp, const VectorXd& beta_prev) {
    const Index d = beta_prev.size();
    const double eps2 = hp.smoothing_floor * hp.smoothing_floor;
    bool any = false;
    for (std::size_t j = 0; j < geoms.size(); ++j) {
        if (hp.weights[j] * hp.lambdas[j] > 0.0 && geoms[j].rank() > 0) any = true;
    }
    if (!any) return beta_prev;

    VectorXd beta = beta_prev;
    for (int it = 0; it < 500; ++it) {
        MatrixXd lhs = MatrixXd::Zero(d, d);
        VectorXd rhs = VectorXd::Zero(d);
        // Fixed task order keeps the sums reproducible.
        for (std::size_t j = 0; j < geoms.size(); ++j) {
            const double wl = hp.weights[j] * hp.lambdas[j];
            if (!(wl > 0.0)) continue;
            const MatrixXd& sigma = geoms[j].sigma();
            const VectorXd diff = thetas[j] - beta;
            const double dev2 = std::max(0.0, diff.dot(sigma * diff));
            const double denom = std::sqrt(dev2 + eps2);
            const double c = denom > 0.0 ? wl / denom : wl * 1e300;
            lhs += c * sigma;
            rhs += c * (sigma * thetas[j]);
        }
        // Normalize before the pseudo-inverse so that huge coefficients do not distort the rank test.
        const double scale = lhs.diagonal().cwiseAbs().maxCoeff();
        if (!(scale > 0.0)) break;
        const auto g = TaskGeometry::from_matrix(lhs / scale);
        const auto basis = g.range_basis();
        const VectorXd next =
            basis * (basis.transpose() * (rhs / scale)).cwiseQuotient(g.range_eigenvalues());
        const double change = (next - beta).norm();
        beta = next;
        if (change <= 1e-12 * std::max(1.0, beta.norm())) break;
    }
    return beta;
}

double smoothed_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                          const VectorXd& beta) {
    check_shapes(ds, thetas, beta);
    const double eps2 = hp.smoothing_floor * hp.smoothing_floor;
    double total = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        const auto& task = ds.tasks[j];
        const double dev = prediction_seminorm(task, thetas[j] - beta);
        total += hp.weights[j] * (linear_task_loss(task, thetas[j]) + hp.lambdas[j] * std::sqrt(dev * dev + eps2));
    }
    return total;
}

SmoothedGradient smoothed_gradient(const MultiTaskDataset& ds, const Hyperparameters& hp,
                                   const std::vector<VectorXd>& thetas, const VectorXd& beta) {
    check_shapes(ds, thetas, beta);
    const double eps2 = hp.smoothing_floor * hp.smoothing_floor;
    SmoothedGradient out;
    out.beta = VectorXd::Zero(ds.d());
    for (Index j = 0; j < ds.m(); ++j) {
        const auto& task = ds.tasks[j];
        const double n = static_cast<double>(task.n());
        const VectorXd loss_grad = task.design.transpose() * (task.design * thetas[j] - task.responses) / n;
        const VectorXd xv = task.design * (thetas[j] - beta);
        const double dev2 = xv.squaredNorm() / n;
        const double denom = std::sqrt(dev2 + eps2);
        VectorXd pen = VectorXd::Zero(ds.d());
        if (denom > 0.0) pen = hp.lambdas[j] * (task.design.transpose() * xv / n) / denom;
        out.thetas.push_back(hp.weights[j] * (loss_grad + pen));
        out.beta -= hp.weights[j] * pen;
    }
    return out;
}

VectorXd initial_center(const MultiTaskDataset& ds, const std::vector<VectorXd>& ols, const Hyperparameters& hp) {
    VectorXd beta = VectorXd::Zero(ds.d());
    double total = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        const double c = hp.weights[j] * static_cast<double>(ds.tasks[j].n());
        beta += c * ols[j];
        total += c;
    }
    return beta / total;
}

namespace {

FitResult finish(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, const Hyperparameters& hp,
                 std::vector<VectorXd> thetas, VectorXd beta, int iterations, bool converged) {
    FitResult res;
    res.objective = mtlr_objective(ds, hp, thetas, beta);
    for (Index j = 0; j < ds.m(); ++j) {
        res.per_task_deviation_seminorm.push_back(seminorm(geoms[j], thetas[j] - beta));
    }
    res.thetas = std::move(thetas);
    res.beta = std::move(beta);
    res.iterations = iterations;
    res.converged = converged;
    return res;
}

FitResult fit_block_coordinate(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                               const Hyperparameters& hp, const std::vector<VectorXd>& ols) {
    std::vector<VectorXd> thetas = ols;
    VectorXd beta = initial_center(ds, ols, hp);
    double prev = mtlr_objective(ds, hp, thetas, beta);
    bool converged = false;
    int it = 0;
    for (; it < hp.max_iters; ++it) {
        for (Index j = 0; j < ds.m(); ++j) thetas[j] = theta_step_linear(geoms[j], ols[j], beta, hp.lambdas[j]);
        beta = beta_step(geoms, thetas, hp, beta);
        const double obj = mtlr_objective(ds, hp, thetas, beta);
        if (std::abs(prev - obj) <= hp.rel_obj_tol * (1.0 + std::abs(obj))) {
            converged = true;
            prev = obj;
            ++it;
            break;
        }
        prev = obj;
    }
    for (Index j = 0; j < ds.m(); ++j) thetas[j] = theta_step_linear(geoms[j], ols[j], beta, hp.lambdas[j]);
    return finish(ds, geoms, hp, std::move(thetas), std::move(beta), it, converged);
}

FitResult fit_smoothed_lbfgs(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                             const Hyperparameters& hp, const std::vector<VectorXd>& ols) {
    const Index m = ds.m();
    const Index d = ds.d();
    auto unpack = [&](const VectorXd& x, std::vector<VectorXd>& thetas, VectorXd& beta) {
        thetas.resize(m);
        for (Index j = 0; j < m; ++j) thetas[j] = x.segment(j * d, d);
        beta = x.segment(m * d, d);
    };
    ValueGrad fg = [&](const VectorXd& x, VectorXd& grad) {
        std::vector<VectorXd> thetas;
        VectorXd beta;
        unpack(x, thetas, beta);
        const auto sg = smoothed_gradient(ds, hp, thetas, beta);
        grad.resize(x.size());
        for (Index j = 0; j < m; ++j) grad.segment(j * d, d) = sg.thetas[j];
        grad.segment(m * d, d) = sg.beta;
        return smoothed_objective(ds, hp, thetas, beta);
    };
    VectorXd x0((m + 1) * d);
    for (Index j = 0; j < m; ++j) x0.segment(j * d, d) = ols[j];
    x0.segment(m * d, d) = initial_center(ds, ols, hp);
    LbfgsOptions lo;
    lo.max_iters = hp.max_iters;
    lo.rel_obj_tol = hp.rel_obj_tol;
    const auto r = minimize_lbfgs(fg, x0, lo);
    std::vector<VectorXd> thetas;
    VectorXd beta;
    unpack(r.x, thetas, beta);
    return finish(ds, geoms, hp, std::move(thetas), std::move(beta), r.iterations, r.converged);
}

} // namespace

FitResult fit_mtlr_linear(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                          const Hyperparameters& hp, const LinearFitOptions& opts) {
    hp.validate(ds.m());
    if (static_cast<Index>(geoms.size()) != ds.m()) {
        throw Error(ErrorCode::DimensionMismatch, "expected one geometry per task");
    }
    std::vector<VectorXd> ols;
    ols.reserve(ds.m());
    for (Index j = 0; j < ds.m(); ++j) ols.push_back(whitened_ols(ds.tasks[j], geoms[j]));

    switch (opts.solver) {
        case LinearSolver::BlockCoordinate: return fit_block_coordinate(ds, geoms, hp, ols);
        case LinearSolver::SmoothedLbfgs: return fit_smoothed_lbfgs(ds, geoms, hp, ols);
        case LinearSolver::Profile: break;
    }

    std::vector<detail::ProfileTask> tasks;
    for (Index j = 0; j < ds.m(); ++j) tasks.push_back({&geoms[j], ols[j], hp.weights[j], hp.lambdas[j]});
    auto sol = detail::minimize_profile(tasks, initial_center(ds, ols, hp), detail::PenaltyMetric::Seminorm,
                                        hp.max_iters, hp.rel_obj_tol);
    return finish(ds, geoms, hp, std::move(sol.thetas), std::move(sol.beta), sol.iterations, sol.converged);
}

FitResult fit_mtlr_linear(const MultiTaskDataset& ds, const Hyperparameters& hp, const LinearFitOptions& opts) {
    validate_dataset(ds);
    return fit_mtlr_linear(ds, second_moments(ds), hp, opts);
}

} // namespace mtlr
