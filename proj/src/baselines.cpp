#include "mtlr/baselines.hpp"

#include "mtlr/detail/profile.hpp"
#include "mtlr/solver_linear.hpp"

namespace mtlr {

namespace {

GlmSpec resolve(const GlmSpec* spec) { return spec ? *spec : GlmSpec::logistic(); }

double task_loss(const MultiTaskDataset& ds, Index j, const VectorXd& theta, const GlmSpec& spec) {
    return ds.model_kind == ModelKind::Linear ? linear_task_loss(ds.tasks[j], theta)
                                              : glm_loss(ds.tasks[j], spec, theta);
}

TaskDataset stack_tasks(const MultiTaskDataset& ds) {
    Index total = 0;
    for (const auto& t : ds.tasks) total += t.n();
    TaskDataset out;
    out.design.resize(total, ds.d());
    out.responses.resize(total);
    out.task_id = 0;
    Index row = 0;
    for (const auto& t : ds.tasks) {
        out.design.middleRows(row, t.n()) = t.design;
        out.responses.segment(row, t.n()) = t.responses;
        row += t.n();
    }
    return out;
}

FitResult assemble(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, std::vector<VectorXd> thetas,
                   VectorXd beta, const GlmSpec& spec) {
    FitResult res;
    res.objective = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        res.objective += task_loss(ds, j, thetas[j], spec);
        res.per_task_deviation_seminorm.push_back(seminorm(geoms[j], thetas[j] - beta));
    }
    res.thetas = std::move(thetas);
    res.beta = std::move(beta);
    res.iterations = 0;
    res.converged = true;
    return res;
}

} // namespace

FitResult fit_itl(const MultiTaskDataset& ds, const GlmSpec* spec) {
    validate_dataset(ds);
    const GlmSpec g = resolve(spec);
    const auto geoms = second_moments(ds);
    std::vector<VectorXd> thetas;
    VectorXd mean = VectorXd::Zero(ds.d());
    for (Index j = 0; j < ds.m(); ++j) {
        thetas.push_back(ds.model_kind == ModelKind::Linear ? whitened_ols(ds.tasks[j], geoms[j])
                                                            : constrained_mle(ds.tasks[j], g));
        mean += thetas.back();
    }
    mean /= static_cast<double>(ds.m());
    return assemble(ds, geoms, std::move(thetas), std::move(mean), g);
}

FitResult fit_dp(const MultiTaskDataset& ds, const GlmSpec* spec) {
    validate_dataset(ds);
    const GlmSpec g = resolve(spec);
    const TaskDataset pooled = stack_tasks(ds);
    const VectorXd beta = ds.model_kind == ModelKind::Linear ? whitened_ols(pooled) : constrained_mle(pooled, g);
    std::vector<VectorXd> thetas(ds.m(), beta);
    return assemble(ds, second_moments(ds), std::move(thetas), beta, g);
}

double armul_objective(const MultiTaskDataset& ds, const Hyperparameters& hp, const std::vector<VectorXd>& thetas,
                       const VectorXd& beta, const GlmSpec* spec) {
    const GlmSpec g = resolve(spec);
    double total = 0.0;
    for (Index j = 0; j < ds.m(); ++j) {
        total += hp.weights[j] * (task_loss(ds, j, thetas[j], g) + hp.lambdas[j] * (thetas[j] - beta).norm());
    }
    return total;
}

FitResult fit_armul(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, const Hyperparameters& hp,
                    const GlmSpec* spec) {
    hp.validate(ds.m());
    const GlmSpec g = resolve(spec);
    if (ds.model_kind == ModelKind::Logistic) {
        FitResult res = detail::fit_penalized_glm(ds, geoms, g, hp, detail::PenaltyMetric::Euclidean);
        res.objective = armul_objective(ds, hp, res.thetas, res.beta, &g);
        return res;
    }

    std::vector<VectorXd> ols;
    for (Index j = 0; j < ds.m(); ++j) ols.push_back(whitened_ols(ds.tasks[j], geoms[j]));
    std::vector<detail::ProfileTask> tasks;
    for (Index j = 0; j < ds.m(); ++j) tasks.push_back({&geoms[j], ols[j], hp.weights[j], hp.lambdas[j]});
    auto sol = detail::minimize_profile(tasks, initial_center(ds, ols, hp), detail::PenaltyMetric::Euclidean,
                                        hp.max_iters, hp.rel_obj_tol);

    FitResult res;
    res.objective = armul_objective(ds, hp, sol.thetas, sol.beta, &g);
    for (Index j = 0; j < ds.m(); ++j) res.per_task_deviation_seminorm.push_back(seminorm(geoms[j], sol.thetas[j] - sol.beta));
    res.thetas = std::move(sol.thetas);
    res.beta = std::move(sol.beta);
    res.iterations = sol.iterations;
    res.converged = sol.converged;
    return res;
}

FitResult fit_armul(const MultiTaskDataset& ds, const Hyperparameters& hp, const GlmSpec* spec) {
    validate_dataset(ds);
    return fit_armul(ds, second_moments(ds), hp, spec);
}

} // namespace mtlr
