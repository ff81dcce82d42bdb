#include "mtlr/glm.hpp"

#include <algorithm>
#include <cmath>

#include "mtlr/detail/profile.hpp"
#include "mtlr/optim.hpp"
#include "mtlr/spectral.hpp"

namespace mtlr {

namespace {

double logistic_psi(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double logistic_link(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double logistic_curvature(double t) {
    // e^{-|t|} / (1 + e^{-|t|})^2 keeps precision in the tails where p (1 - p) rounds to 0
    const double e = std::exp(-std::abs(t));
    return e / ((1.0 + e) * (1.0 + e));
}

// Smoothing levels for continuation, ending at `floor` (or 1e-12 when floor is zero).
std::vector<double> smoothing_schedule(double floor) {
    const double last = floor > 0.0 ? floor : 1e-12;
    std::vector<double> out;
    for (double e = 1e-2; e > last * 1.0000001; e *= 1e-2) out.push_back(e);
    out.push_back(last);
    return out;
}

VectorXd penalty_apply(detail::PenaltyMetric metric, const TaskGeometry& geom, const VectorXd& v) {
    return metric == detail::PenaltyMetric::Seminorm ? VectorXd(geom.sigma() * v) : v;
}

double penalty_norm(detail::PenaltyMetric metric, const TaskGeometry& geom, const VectorXd& v) {
    return metric == detail::PenaltyMetric::Seminorm ? seminorm(geom, v) : v.norm();
}

double penalty_scale(detail::PenaltyMetric metric, const TaskGeometry& geom) {
    return metric == detail::PenaltyMetric::Seminorm ? geom.max_eigenvalue() : 1.0;
}

// True when theta = beta already minimizes f + lambda * penalty(. - beta) (ignoring the constraint,
// which can only enlarge the set of such lambdas).
bool snaps_to_center(const VectorXd& grad_at_beta, const TaskGeometry& geom, double lambda,
                     detail::PenaltyMetric metric) {
    if (metric == detail::PenaltyMetric::Seminorm) {
        const double outside = (grad_at_beta - geom.project_range(grad_at_beta)).norm();
        if (outside > 1e-10 * (1.0 + grad_at_beta.norm())) return false;
        return geom.whiten_dual(grad_at_beta).norm() <= lambda;
    }
    return grad_at_beta.norm() <= lambda;
}

} // namespace

GlmSpec GlmSpec::logistic(double xi) {
    GlmSpec s;
    s.psi = &logistic_psi;
    s.link = &logistic_link;
    s.curvature = &logistic_curvature;
    s.xi = xi;
    s.curvature_max = 0.25;
    return s;
}

CurvatureBounds realized_curvature_bounds(const MultiTaskDataset& ds, const GlmSpec& spec) {
    double max_row = 0.0;
    for (const auto& t : ds.tasks) {
        if (t.n() > 0) max_row = std::max(max_row, t.design.rowwise().norm().maxCoeff());
    }
    CurvatureBounds b;
    b.predictor_radius = max_row * spec.xi;
    b.lower = std::numeric_limits<double>::infinity();
    b.upper = 0.0;
    constexpr int kGrid = 2001;
    for (int k = 0; k < kGrid; ++k) {
        const double z = -b.predictor_radius + 2.0 * b.predictor_radius * k / (kGrid - 1);
        const double c = spec.curvature(z);
        b.lower = std::min(b.lower, c);
        b.upper = std::max(b.upper, c);
    }
    return b;
}

LossGrad glm_loss_grad(const TaskDataset& task, const GlmSpec& spec, const VectorXd& theta) {
    const VectorXd z = task.design * theta;
    const double n = static_cast<double>(task.n());
    LossGrad out;
    VectorXd resid(z.size());
    double loss = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
        loss += spec.psi(z(i)) - task.responses(i) * z(i);
        resid(i) = spec.link(z(i)) - task.responses(i);
    }
    out.loss = loss / n;
    out.grad = task.design.transpose() * resid / n;
    return out;
}

double glm_loss(const TaskDataset& task, const GlmSpec& spec, const VectorXd& theta) {
    const VectorXd z = task.design * theta;
    double loss = 0.0;
    for (Index i = 0; i < z.size(); ++i) loss += spec.psi(z(i)) - task.responses(i) * z(i);
    return loss / static_cast<double>(task.n());
}

double glm_mtlr_objective(const MultiTaskDataset& ds, const GlmSpec& spec, const Hyperparameters& hp,
                          const std::vector<VectorXd>& thetas, const VectorXd& beta) {
    double total = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        const auto& task = ds.tasks[j];
        const double dev = (task.design * (thetas[j] - beta)).norm() / std::sqrt(static_cast<double>(task.n()));
        total += hp.weights[j] * (glm_loss(task, spec, thetas[j]) + hp.lambdas[j] * dev);
    }
    return total;
}

VectorXd constrained_mle(const TaskDataset& task, const GlmSpec& spec) {
    const double xi = spec.xi;
    ValueGrad fg = [&](const VectorXd& x, VectorXd& grad) {
        auto lg = glm_loss_grad(task, spec, x);
        grad = std::move(lg.grad);
        return lg.loss;
    };
    Projection proj = [xi](const VectorXd& v) { return ball_project(v, xi); };
    FistaOptions fo;
    const double top = (task.design.transpose() * task.design / static_cast<double>(task.n())).norm();
    fo.initial_lipschitz = std::max(1e-8, spec.curvature_max * top);
    return minimize_projected_fista(fg, proj, VectorXd::Zero(task.d()), fo).x;
}

GlmThetaStep theta_step_glm(const TaskDataset& task, const GlmSpec& spec, const TaskGeometry& geom,
                            const VectorXd& beta, double lambda, const Hyperparameters& hp) {
    const double xi = hp.xi.value_or(spec.xi);
    GlmThetaStep out;
    const auto at_beta = glm_loss_grad(task, spec, beta);
    if (snaps_to_center(at_beta.grad, geom, lambda, detail::PenaltyMetric::Seminorm)) {
        out.theta = beta;
        out.converged = true;
        return out;
    }

    const MatrixXd& sigma = geom.sigma();
    Projection proj = [xi](const VectorXd& v) { return ball_project(v, xi); };
    VectorXd theta = beta;
    bool all_converged = true;
    double last_eps = 0.0;
    for (double eps : smoothing_schedule(hp.smoothing_floor)) {
        last_eps = eps;
        ValueGrad fg = [&, eps](const VectorXd& x, VectorXd& grad) {
            auto lg = glm_loss_grad(task, spec, x);
            const VectorXd v = x - beta;
            const VectorXd sv = sigma * v;
            const double root = std::sqrt(std::max(0.0, v.dot(sv)) + eps * eps);
            grad = lg.grad + lambda * sv / root;
            return lg.loss + lambda * root;
        };
        FistaOptions fo;
        fo.max_iters = hp.max_iters;
        fo.initial_lipschitz = spec.curvature_max * geom.max_eigenvalue() + lambda * geom.max_eigenvalue() / eps;
        const auto r = minimize_projected_fista(fg, proj, theta, fo);
        theta = r.x;
        out.iterations += r.iterations;
        all_converged = all_converged && r.converged;
    }
    // Gradient-mapping residual of the final smoothed problem.
    {
        auto lg = glm_loss_grad(task, spec, theta);
        const VectorXd v = theta - beta;
        const VectorXd sv = sigma * v;
        const double root = std::sqrt(std::max(0.0, v.dot(sv)) + last_eps * last_eps);
        const VectorXd g = lg.grad + lambda * sv / root;
        out.kkt_residual = (theta - ball_project(theta - g, xi)).norm();
    }
    out.theta = theta;
    out.converged = all_converged;
    return out;
}

namespace detail {

FitResult fit_penalized_glm(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms,
                            const GlmSpec& spec, const Hyperparameters& hp, PenaltyMetric metric) {
    hp.validate(ds.m());
    const double xi = hp.xi.value_or(spec.xi);
    const Index m = ds.m();
    const Index d = ds.d();
    const Index blocks = m + 1;

    auto unpack = [&](const VectorXd& x, Index j) { return x.segment(j * d, d); };

    Projection proj = [&](const VectorXd& v) {
        VectorXd out(v.size());
        for (Index j = 0; j < blocks; ++j) out.segment(j * d, d) = ball_project(v.segment(j * d, d), xi);
        return out;
    };

    double base_lip = 0.0;
    for (Index j = 0; j < m; ++j) {
        base_lip = std::max(base_lip, hp.weights[j] * spec.curvature_max * geoms[j].max_eigenvalue());
    }

    // Consensus candidate: the ball-constrained minimizer of sum_j w_j f_j. When every task
    // snaps there it is optimal for the joint problem (theta_j = beta, subgradients -grad f_j).
    ValueGrad pooled = [&](const VectorXd& b, VectorXd& grad) {
        grad.setZero(d);
        double total = 0.0;
        for (Index j = 0; j < m; ++j) {
            auto lg = glm_loss_grad(ds.tasks[j], spec, b);
            total += hp.weights[j] * lg.loss;
            grad += hp.weights[j] * lg.grad;
        }
        return total;
    };
    FistaOptions po;
    po.max_iters = hp.max_iters;
    double pooled_lip = 0.0;
    for (Index j = 0; j < m; ++j) pooled_lip += hp.weights[j] * spec.curvature_max * geoms[j].max_eigenvalue();
    po.initial_lipschitz = std::max(1e-8, pooled_lip);
    const auto consensus = minimize_projected_fista(
        pooled, [xi](const VectorXd& v) { return ball_project(v, xi); }, VectorXd::Zero(d), po);
    bool all_snap = true;
    for (Index j = 0; j < m && all_snap; ++j) {
        all_snap = snaps_to_center(glm_loss_grad(ds.tasks[j], spec, consensus.x).grad, geoms[j], hp.lambdas[j], metric);
    }
    if (all_snap) {
        FitResult res;
        res.beta = consensus.x;
        res.thetas.assign(m, consensus.x);
        res.per_task_deviation_seminorm.assign(m, 0.0);
        for (Index j = 0; j < m; ++j) res.objective += hp.weights[j] * glm_loss(ds.tasks[j], spec, consensus.x);
        res.iterations = consensus.iterations;
        res.converged = consensus.converged;
        return res;
    }

    VectorXd x = VectorXd::Zero(blocks * d);
    int iterations = consensus.iterations;
    bool converged = true;
    for (double eps : smoothing_schedule(hp.smoothing_floor)) {
        ValueGrad fg = [&, eps](const VectorXd& z, VectorXd& grad) {
            grad.setZero(z.size());
            const VectorXd beta = unpack(z, m);
            double total = 0.0;
            for (Index j = 0; j < m; ++j) {
                const VectorXd theta = unpack(z, j);
                auto lg = glm_loss_grad(ds.tasks[j], spec, theta);
                const VectorXd v = theta - beta;
                const VectorXd mv = penalty_apply(metric, geoms[j], v);
                const double root = std::sqrt(std::max(0.0, v.dot(mv)) + eps * eps);
                const double w = hp.weights[j];
                const double lam = hp.lambdas[j];
                total += w * (lg.loss + lam * root);
                grad.segment(j * d, d) = w * (lg.grad + lam * mv / root);
                grad.segment(m * d, d) -= w * lam * mv / root;
            }
            return total;
        };
        double pen_lip = 0.0;
        for (Index j = 0; j < m; ++j) {
            pen_lip = std::max(pen_lip, hp.weights[j] * hp.lambdas[j] * penalty_scale(metric, geoms[j]) / eps);
        }
        FistaOptions fo;
        fo.max_iters = hp.max_iters;
        fo.initial_lipschitz = std::max(1e-8, base_lip + 2.0 * pen_lip);
        const auto r = minimize_projected_fista(fg, proj, x, fo);
        x = r.x;
        iterations += r.iterations;
        converged = r.converged;
    }

    std::vector<VectorXd> thetas(m);
    for (Index j = 0; j < m; ++j) thetas[j] = unpack(x, j);
    VectorXd beta = unpack(x, m);

    auto exact = [&](const std::vector<VectorXd>& th) {
        double total = 0.0;
        for (Index j = 0; j < m; ++j) {
            total += hp.weights[j] * (glm_loss(ds.tasks[j], spec, th[j]) +
                                      hp.lambdas[j] * penalty_norm(metric, geoms[j], th[j] - beta));
        }
        return total;
    };
    // Snap tasks whose center is already optimal; smoothing leaves them a hair away.
    double current = exact(thetas);
    for (Index j = 0; j < m; ++j) {
        const auto g = glm_loss_grad(ds.tasks[j], spec, beta).grad;
        if (!snaps_to_center(g, geoms[j], hp.lambdas[j], metric)) continue;
        auto trial = thetas;
        trial[j] = beta;
        const double value = exact(trial);
        if (value <= current) {
            thetas = std::move(trial);
            current = value;
        }
    }

    FitResult res;
    res.objective = current;
    for (Index j = 0; j < m; ++j) res.per_task_deviation_seminorm.push_back(seminorm(geoms[j], thetas[j] - beta));
    res.thetas = std::move(thetas);
    res.beta = std::move(beta);
    res.iterations = iterations;
    res.converged = converged;
    return res;
}

} // namespace detail

FitResult fit_mtlr_glm(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, const GlmSpec& spec,
                       const Hyperparameters& hp) {
    return detail::fit_penalized_glm(ds, geoms, spec, hp, detail::PenaltyMetric::Seminorm);
}

FitResult fit_mtlr_glm(const MultiTaskDataset& ds, const GlmSpec& spec, const Hyperparameters& hp) {
    validate_dataset(ds);
    if (ds.model_kind != ModelKind::Logistic) {
        throw Error(ErrorCode::ConfigError, "fit_mtlr_glm needs a logistic dataset");
    }
    return fit_mtlr_glm(ds, second_moments(ds), spec, hp);
}

} // namespace mtlr
