#include <doctest.h>

#include <cmath>

#include "mtlr/glm.hpp"
#include "support.hpp"

using namespace mtlr;
using namespace mtlr::testing;

namespace {

TaskDataset logistic_task(const MatrixXd& x, const VectorXd& y) {
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

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST_SUITE("solver_glm") {

TEST_CASE("loss and gradient at the origin") {
    const auto spec = GlmSpec::logistic();
    Rng rng(51, 0);
    const MatrixXd x = gaussian_matrix(7, 3, rng);
    VectorXd y(7);
    y << 1, 0, 0, 1, 1, 0, 1;
    const auto lg = glm_loss_grad(logistic_task(x, y), spec, VectorXd::Zero(3));
    CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const VectorXd expect = x.transpose() * (VectorXd::Constant(7, 0.5) - y) / 7.0;
    CHECK((lg.grad - expect).norm() <= 1e-15);

    const auto single = glm_loss_grad(logistic_task(MatrixXd::Ones(1, 1), VectorXd::Ones(1)), spec, VectorXd::Zero(1));
    CHECK(single.loss == doctest::Approx(std::log(2.0)));
    CHECK(single.grad(0) == doctest::Approx(-0.5));
}

TEST_CASE("gradient matches finite differences") {
    const auto spec = GlmSpec::logistic();
    Rng rng(52, 0);
    const auto ds = random_logistic(1, 4, 30, rng);
    const auto& task = ds.tasks[0];
    for (int k = 0; k < 100; ++k) {
        const VectorXd th = 2.0 * gaussian_vector(4, rng);
        const VectorXd fd = central_difference([&](const VectorXd& v) { return glm_loss(task, spec, v); }, th);
        const VectorXd g = glm_loss_grad(task, spec, th).grad;
        CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
    }
}

TEST_CASE("loss is overflow safe") {
    const auto spec = GlmSpec::logistic();
    const auto t = logistic_task(MatrixXd::Constant(1, 1, 1.0), VectorXd::Zero(1));
    CHECK(glm_loss(t, spec, VectorXd::Constant(1, 800.0)) == doctest::Approx(800.0));
    CHECK(glm_loss(t, spec, VectorXd::Constant(1, -800.0)) >= 0.0);
    CHECK(std::isfinite(glm_loss(t, spec, VectorXd::Constant(1, -800.0))));
}

TEST_CASE("logistic curvature range") {
    const auto spec = GlmSpec::logistic();
    for (double z = -40.0; z <= 40.0; z += 0.37) {
        const double c = spec.curvature(z);
        CHECK(c > 0.0);
        CHECK(c <= 0.25);
        CHECK(c == doctest::Approx(spec.link(z) * (1.0 - spec.link(z))).epsilon(1e-12));
    }
    CHECK(spec.curvature(0.0) == 0.25);
}

TEST_CASE("realized curvature bounds") {
    MultiTaskDataset ds;
    ds.model_kind = ModelKind::Logistic;
    MatrixXd x(2, 2);
    x << 3, 4, 0.5, 0;
    ds.tasks.push_back(logistic_task(x, vec2(1, 0)));
    const auto b = realized_curvature_bounds(ds, GlmSpec::logistic(2.0));
    CHECK(b.predictor_radius == doctest::Approx(10.0));
    CHECK(b.upper == doctest::Approx(0.25));
    CHECK(b.lower == doctest::Approx(sigmoid(10.0) * (1.0 - sigmoid(10.0))).epsilon(1e-9));
}

TEST_CASE("separable data hits the ball boundary") {
    auto spec = GlmSpec::logistic(1.0);
    VectorXd xv(4), y(4);
    xv << 1, 2, -1, -3;
    y << 1, 1, 0, 0;
    const auto task = logistic_task(xv, y);
    const auto geom = second_moment(task);
    auto grid_best = 0.0, grid_val = 1e300;
    for (int k = 0; k <= 2000; ++k) {
        const double t = -1.0 + k / 1000.0;
        const double v = glm_loss(task, spec, VectorXd::Constant(1, t));
        if (v < grid_val) grid_val = v, grid_best = t;
    }
    CHECK(grid_best == 1.0);
    Hyperparameters hp = uniform_hp(1, 0.0);
    const auto step = theta_step_glm(task, spec, geom, VectorXd::Zero(1), 0.0, hp);
    CHECK(step.theta(0) == doctest::Approx(grid_best).epsilon(1e-9));
    CHECK(constrained_mle(task, spec)(0) == doctest::Approx(1.0).epsilon(1e-9));

    VectorXd flipped = VectorXd::Ones(4) - y;
    CHECK(constrained_mle(logistic_task(xv, flipped), spec)(0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("constrained MLE is consistent") {
    Rng rng(53, 0);
    const VectorXd theta = vec2(0.8, -0.5);
    const MatrixXd x = gaussian_matrix(5000, 2, rng);
    VectorXd y(5000);
    for (int i = 0; i < 5000; ++i) y(i) = rng.uniform() < sigmoid(x.row(i).dot(theta)) ? 1.0 : 0.0;
    const auto task = logistic_task(x, y);
    const auto spec = GlmSpec::logistic();
    const VectorXd newton = newton_logistic(x, y);
    const auto step = theta_step_glm(task, spec, second_moment(task), VectorXd::Zero(2), 0.0, uniform_hp(1, 0.0));
    const auto geom = second_moment(task);
    CHECK(seminorm(geom, step.theta - theta) <= 0.1);
    CHECK((step.theta - newton).norm() <= 1e-6);
    CHECK((constrained_mle(task, spec) - newton).norm() <= 1e-6);
}

TEST_CASE("theta step returns the center above the gradient threshold") {
    Rng rng(54, 0);
    const auto spec = GlmSpec::logistic();
    for (int trial = 0; trial < 30; ++trial) {
        const auto ds = random_logistic(1, 3, 40, rng);
        const auto geom = second_moment(ds.tasks[0]);
        const VectorXd beta = gaussian_vector(3, rng);
        const VectorXd g = glm_loss_grad(ds.tasks[0], spec, beta).grad;
        const double thr = geom.whiten_dual(g).norm();
        const auto step = theta_step_glm(ds.tasks[0], spec, geom, beta, 1.01 * thr, uniform_hp(1, 0.0));
        CHECK(seminorm(geom, step.theta - beta) <= 1e-8);
        // just below the threshold the center is not optimal
        const auto below = theta_step_glm(ds.tasks[0], spec, geom, beta, 0.5 * thr, uniform_hp(1, 0.0));
        CHECK(seminorm(geom, below.theta - beta) > 1e-6);
    }
}

TEST_CASE("heavy penalty on identical tasks gives the pooled MLE") {
    Rng rng(55, 0);
    const auto one = random_logistic(1, 2, 25, rng);
    MultiTaskDataset ds;
    ds.model_kind = ModelKind::Logistic;
    for (int j = 0; j < 3; ++j) ds.tasks.push_back(one.tasks[0]);
    const auto spec = GlmSpec::logistic();
    const auto fit = fit_mtlr_glm(ds, spec, uniform_hp(3, 1e6));
    const VectorXd mle = constrained_mle(one.tasks[0], spec);
    CHECK((fit.beta - mle).norm() <= 1e-6);
    for (const auto& th : fit.thetas) CHECK((th - fit.beta).norm() <= 1e-10);
}

TEST_CASE("zero penalty decouples into per-task MLEs") {
    Rng rng(56, 0);
    const auto ds = random_logistic(3, 2, 30, rng);
    const auto spec = GlmSpec::logistic();
    const auto fit = fit_mtlr_glm(ds, spec, uniform_hp(3, 0.0));
    for (int j = 0; j < 3; ++j) CHECK((fit.thetas[j] - constrained_mle(ds.tasks[j], spec)).norm() <= 1e-6);
}

TEST_CASE("fit agrees with a long projected subgradient run") {
    Rng rng(57, 0);
    const auto ds = random_logistic(2, 2, 8, rng);
    const auto spec = GlmSpec::logistic();
    for (double q : {0.3, 1.0}) {
        const auto hp = Hyperparameters::from_schedule(ds, q);
        const auto fit = fit_mtlr_glm(ds, spec, hp);
        const double oracle = subgradient_glm(ds, hp, spec.xi, 1000000);
        CHECK(std::abs(fit.objective - reference_glm_objective(ds, hp, fit.thetas, fit.beta)) <=
              1e-12 * fit.objective);
        CHECK(std::abs(fit.objective - oracle) <= 1e-5 * oracle);
    }
}

TEST_CASE("iterates stay in the ball") {
    Rng rng(58, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ds = random_logistic(4, 3, 20, rng, 5.0);
        const double xi = 0.5 + trial * 0.2;
        const auto spec = GlmSpec::logistic(xi);
        const auto fit = fit_mtlr_glm(ds, spec, Hyperparameters::from_schedule(ds, 0.5));
        CHECK(fit.beta.norm() <= xi + 1e-12);
        for (const auto& th : fit.thetas) CHECK(th.norm() <= xi + 1e-12);
    }
}

TEST_CASE("prediction error is dominated by parameter error") {
    Rng rng(59, 0);
    const auto spec = GlmSpec::logistic();
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<VectorXd> truth;
        const auto ds = random_logistic(3, 3, 30, rng, 1.0, &truth);
        const auto fit = fit_mtlr_glm(ds, spec, Hyperparameters::from_schedule(ds, 0.7));
        for (int j = 0; j < 3; ++j) {
            const auto& x = ds.tasks[j].design;
            double pred = 0.0;
            for (Index i = 0; i < x.rows(); ++i) {
                const double diff = sigmoid(x.row(i).dot(truth[j])) - sigmoid(x.row(i).dot(fit.thetas[j]));
                pred += diff * diff;
            }
            pred /= static_cast<double>(x.rows());
            const double e = seminorm(second_moment(ds.tasks[j]), fit.thetas[j] - truth[j]);
            CHECK(pred <= 0.25 * 0.25 * e * e + 1e-10);
        }
    }
}

}
