#include <doctest.h>

#include <cmath>

#include "mtlr/detail/profile.hpp"
#include "mtlr/solver_linear.hpp"
#include "support.hpp"

using namespace mtlr;
using namespace mtlr::testing;

namespace {

TaskDataset task_of(const MatrixXd& x, const VectorXd& y) {
    TaskDataset t;
    t.design = x;
    t.responses = y;
    return t;
}

Hyperparameters uniform_hp(int m, double lambda) {
    Hyperparameters hp;
    hp.lambdas.assign(m, lambda);
    hp.weights.assign(m, 1.0);
    return hp;
}

} // namespace

TEST_SUITE("solver_linear") {

TEST_CASE("objective values") {
    MultiTaskDataset zero;
    zero.tasks.push_back(task_of(MatrixXd::Ones(3, 2), VectorXd::Zero(3)));
    CHECK(mtlr_objective(zero, uniform_hp(1, 1.0), {VectorXd::Zero(2)}, VectorXd::Zero(2)) == 0.0);

    MultiTaskDataset one;
    one.tasks.push_back(task_of(MatrixXd::Ones(1, 1), VectorXd::Constant(1, 2.0)));
    CHECK(mtlr_objective(one, uniform_hp(1, 1.0), {VectorXd::Ones(1)}, VectorXd::Zero(1)) == doctest::Approx(1.5));
}

TEST_CASE("objective matches a literal recomputation") {
    Rng rng(31, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto ds = random_linear(3, 3, {4, 6, 5}, rng);
        Hyperparameters hp = Hyperparameters::from_schedule(ds, 0.7);
        hp.weights = {1.0, 2.5, 0.3};
        std::vector<VectorXd> th;
        for (int j = 0; j < 3; ++j) th.push_back(gaussian_vector(3, rng));
        const VectorXd b = gaussian_vector(3, rng);
        const double ref = reference_linear_objective(ds, hp, th, b);
        CHECK(std::abs(mtlr_objective(ds, hp, th, b) - ref) <= 1e-12 * std::abs(ref));
    }
}

TEST_CASE("whitened OLS") {
    CHECK((whitened_ols(task_of(MatrixXd::Identity(2, 2), vec2(3, 4))) - vec2(3, 4)).norm() <=
          1e-12);
    MatrixXd x(2, 2);
    x << 1, 0, 1, 0;
    CHECK((whitened_ols(task_of(x, vec2(1, 3))) - vec2(2, 0)).norm() <= 1e-12);

    Rng rng(32, 0);
    const MatrixXd xr = gaussian_matrix(8, 3, rng);
    const VectorXd theta = gaussian_vector(3, rng);
    CHECK((whitened_ols(task_of(xr, xr * theta)) - theta).norm() <= 1e-10);
}

TEST_CASE("theta step closed-form cases") {
    // Sigma = I via n = 2 rows e1, e2 scaled by sqrt(2)
    const auto id = TaskGeometry::from_matrix(MatrixXd::Identity(2, 2), 2);
    CHECK((theta_step_linear(id, vec2(2, 0), VectorXd::Zero(2), 1.0) - vec2(1, 0)).norm() <=
          1e-14);

    MatrixXd s = MatrixXd::Zero(2, 2);
    s(0, 0) = 1.0;
    const auto g = TaskGeometry::from_matrix(s);
    const VectorXd ols = vec2(3, 0), beta = vec2(-1, 5);
    CHECK((theta_step_linear(g, ols, beta, 0.0) - vec2(3, 5)).norm() <= 1e-14);

    Rng rng(33, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto gr = TaskGeometry::from_matrix(random_psd(3, 1 + static_cast<int>(rng.below(3)), rng));
        const VectorXd o = gr.project_range(gaussian_vector(3, rng)), b = gaussian_vector(3, rng);
        const double thr = seminorm(gr, o - b);
        CHECK((theta_step_linear(gr, o, b, thr * (1.0 + rng.uniform())) - b).norm() == 0.0);
    }
}

TEST_CASE("beta step") {
    Rng rng(34, 0);
    MatrixXd s = MatrixXd::Zero(2, 2);
    s(0, 0) = 2.0;
    const VectorXd t = vec2(1.5, -4.0);
    const auto one = beta_step({TaskGeometry::from_matrix(s)}, {t}, uniform_hp(1, 1.0), VectorXd::Zero(2));
    CHECK((one - vec2(1.5, 0.0)).norm() <= 1e-12);

    std::vector<TaskGeometry> g(3, TaskGeometry::from_matrix(MatrixXd::Identity(2, 2)));
    std::vector<VectorXd> tri;
    for (int k = 0; k < 3; ++k) {
        const double a = 2.0 * M_PI * k / 3.0 + 0.3;
        tri.push_back(vec2(std::cos(a), std::sin(a)));
    }
    CHECK(beta_step(g, tri, uniform_hp(3, 1.0), vec2(0.4, -0.2)).norm() <= 1e-8);

    std::vector<TaskGeometry> gs(3, TaskGeometry::from_matrix(s));
    CHECK((beta_step(gs, {t, t, t}, uniform_hp(3, 1.0), vec2(9, 9)) - vec2(1.5, 0.0)).norm() <=
          1e-12);
}

TEST_CASE("noiseless shared parameter is recovered exactly") {
    Rng rng(35, 0);
    const VectorXd theta = gaussian_vector(3, rng);
    MultiTaskDataset ds;
    for (int j = 0; j < 4; ++j) {
        const MatrixXd x = gaussian_matrix(10, 3, rng);
        ds.tasks.push_back(task_of(x, x * theta));
    }
    for (double q : {0.1, 1.0, 4.0}) {
        const auto fit = fit_mtlr_linear(ds, Hyperparameters::from_schedule(ds, q));
        const auto geoms = second_moments(ds);
        for (int j = 0; j < 4; ++j) {
            const double e = seminorm(geoms[j], fit.thetas[j] - theta);
            CHECK(e * e <= 1e-16);
        }
    }
}

TEST_CASE("zero penalty decouples into per-task OLS") {
    Rng rng(36, 0);
    const auto ds = random_linear(3, 2, {5, 6, 7}, rng);
    const auto fit = fit_mtlr_linear(ds, Hyperparameters::from_schedule(ds, 0.0));
    double itl = 0.0;
    for (int j = 0; j < 3; ++j) {
        const VectorXd ols = whitened_ols(ds.tasks[j]);
        CHECK((fit.thetas[j] - ols).norm() <= 1e-10);
        itl += linear_task_loss(ds.tasks[j], ols);
    }
    CHECK(fit.objective == doctest::Approx(itl).epsilon(1e-12));
}

TEST_CASE("fit agrees with a long subgradient run") {
    Rng rng(37, 0);
    const auto ds = random_linear(3, 2, {5, 5, 5}, rng);
    for (double q : {0.5, 2.0}) {
        const auto hp = Hyperparameters::from_schedule(ds, q);
        const auto fit = fit_mtlr_linear(ds, hp);
        const double oracle = subgradient_linear(ds, hp, 1000000);
        CHECK(std::abs(fit.objective - oracle) <= 1e-6 * std::abs(oracle));
    }
}

TEST_CASE("fit result bookkeeping") {
    Rng rng(38, 0);
    const auto ds = random_linear(4, 3, {6, 9, 5, 8}, rng);
    const auto hp = Hyperparameters::from_schedule(ds, 1.0);
    const auto fit = fit_mtlr_linear(ds, hp);
    const auto geoms = second_moments(ds);
    CHECK(fit.converged);
    CHECK(std::abs(fit.objective - mtlr_objective(ds, hp, fit.thetas, fit.beta)) <= 1e-10 * std::abs(fit.objective));
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(fit.per_task_deviation_seminorm[j] - seminorm(geoms[j], fit.thetas[j] - fit.beta)) <= 1e-12);
    }
}

TEST_CASE("null-space conventions") {
    // every task sees only the first two coordinates of d = 3
    Rng rng(39, 0);
    MultiTaskDataset ds;
    for (int j = 0; j < 3; ++j) {
        MatrixXd x = gaussian_matrix(6, 3, rng);
        x.col(2).setZero();
        if (j == 0) x.col(1).setZero();
        ds.tasks.push_back(task_of(x, gaussian_vector(6, rng)));
    }
    const auto fit = fit_mtlr_linear(ds, Hyperparameters::from_schedule(ds, 0.8));
    CHECK(std::abs(fit.beta(2)) <= 1e-12);
    const auto geoms = second_moments(ds);
    for (int j = 0; j < 3; ++j) {
        const VectorXd dev = fit.thetas[j] - fit.beta;
        CHECK((dev - geoms[j].project_range(dev)).norm() <= 1e-10);
    }
}

TEST_CASE("profile value is monotone along the iterations") {
    Rng rng(40, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ds = random_linear(4, 3, {5, 7, 6, 9}, rng);
        const auto hp = Hyperparameters::from_schedule(ds, trial % 2 ? 0.4 : 1.5);
        const auto geoms = second_moments(ds);
        std::vector<detail::ProfileTask> tasks;
        std::vector<VectorXd> ols;
        for (int j = 0; j < 4; ++j) ols.push_back(whitened_ols(ds.tasks[j], geoms[j]));
        for (int j = 0; j < 4; ++j) tasks.push_back({&geoms[j], ols[j], hp.weights[j], hp.lambdas[j]});
        const auto sol = detail::minimize_profile(tasks, initial_center(ds, ols, hp), detail::PenaltyMetric::Seminorm,
                                                  hp.max_iters, hp.rel_obj_tol);
        for (std::size_t k = 1; k < sol.history.size(); ++k) {
            CHECK(sol.history[k] <= sol.history[k - 1] + 1e-12 * (1.0 + std::abs(sol.history[k - 1])));
        }
    }
}

TEST_CASE("cross-check against the alternative solvers") {
    Rng rng(41, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ds = random_linear(3, 2, {6, 8, 7}, rng);
        const auto hp = Hyperparameters::from_schedule(ds, 0.6);
        const double best = fit_mtlr_linear(ds, hp).objective;
        for (auto s : {LinearSolver::BlockCoordinate, LinearSolver::SmoothedLbfgs}) {
            LinearFitOptions o;
            o.solver = s;
            CHECK(best <= fit_mtlr_linear(ds, hp, o).objective + 1e-10 * std::abs(best));
        }
    }
}

TEST_CASE("task permutation equivariance") {
    Rng rng(42, 0);
    const auto ds = random_linear(4, 3, {6, 7, 8, 9}, rng);
    const auto hp = Hyperparameters::from_schedule(ds, 1.0);
    const auto a = fit_mtlr_linear(ds, hp);
    MultiTaskDataset perm = ds;
    std::swap(perm.tasks[0], perm.tasks[3]);
    std::swap(perm.tasks[1], perm.tasks[2]);
    const auto b = fit_mtlr_linear(perm, Hyperparameters::from_schedule(perm, 1.0));
    CHECK((a.beta - b.beta).norm() <= 1e-10);
    CHECK((a.thetas[0] - b.thetas[3]).norm() <= 1e-10);
    CHECK((a.thetas[1] - b.thetas[2]).norm() <= 1e-10);
}

TEST_CASE("halving the smoothing floor leaves the solution unchanged") {
    Rng rng(43, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ds = random_linear(3, 3, {7, 6, 9}, rng);
        auto hp = Hyperparameters::from_schedule(ds, 0.9);
        const double a = fit_mtlr_linear(ds, hp).objective;
        hp.smoothing_floor = 5e-11;
        const double b = fit_mtlr_linear(ds, hp).objective;
        CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
    }
}

TEST_CASE("smoothed gradient special values") {
    Rng rng(44, 0);
    MultiTaskDataset ds;
    const MatrixXd x = gaussian_matrix(6, 2, rng);
    const VectorXd beta = gaussian_vector(2, rng);
    ds.tasks.push_back(task_of(x, x * beta));
    ds.tasks.push_back(task_of(x, x * beta));
    const auto g = smoothed_gradient(ds, uniform_hp(2, 0.7), {beta, beta}, beta);
    CHECK(g.beta.norm() <= 1e-12);
    CHECK(g.thetas[0].norm() <= 1e-12);

    // Sigma = I, eps = 1
    MultiTaskDataset unit;
    MatrixXd e = MatrixXd::Identity(2, 2) * std::sqrt(2.0);
    unit.tasks.push_back(task_of(e, VectorXd::Zero(2)));
    auto hp = uniform_hp(1, 0.8);
    hp.smoothing_floor = 1.0;
    CHECK(smoothed_gradient(unit, hp, {VectorXd::Zero(2)}, VectorXd::Zero(2)).beta.norm() == 0.0);
    CHECK(smoothed_gradient(unit, hp, {vec2(1, 0)}, VectorXd::Zero(2)).beta.norm() ==
          doctest::Approx(0.8 / std::sqrt(2.0)));
}

TEST_CASE("sample-size weighting schedule") {
    Rng rng(45, 0);
    const auto ds = random_linear(2, 4, {9, 16}, rng);
    const auto hp = Hyperparameters::from_schedule(ds, 1.5, WeightScheme::SampleSize);
    CHECK(hp.weights[0] == 9.0);
    CHECK(hp.weights[1] == 16.0);
    CHECK(hp.lambdas[0] == doctest::Approx(1.5 * 2.0 / 3.0));
    CHECK(hp.lambdas[1] == doctest::Approx(1.5 * 2.0 / 4.0));
    const auto fit = fit_mtlr_linear(ds, hp);
    CHECK(std::abs(fit.objective - subgradient_linear(ds, hp, 400000)) <= 1e-6 * fit.objective);
}

}
