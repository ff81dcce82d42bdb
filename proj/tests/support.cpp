#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mtlr::testing {

MatrixXd gaussian_matrix(Index rows, Index cols, Rng& rng) {
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

VectorXd gaussian_vector(Index n, Rng& rng) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

MultiTaskDataset random_linear(int m, int d, const std::vector<int>& n, Rng& rng, double noise_sd,
                               std::vector<VectorXd>* thetas_out) {
    MultiTaskDataset ds;
    for (int j = 0; j < m; ++j) {
        TaskDataset t;
        t.task_id = j;
        t.design = gaussian_matrix(n[j], d, rng);
        const VectorXd theta = gaussian_vector(d, rng);
        t.responses = t.design * theta + noise_sd * gaussian_vector(n[j], rng);
        if (thetas_out) thetas_out->push_back(theta);
        ds.tasks.push_back(std::move(t));
    }
    return ds;
}

MultiTaskDataset random_logistic(int m, int d, int n, Rng& rng, double theta_scale, std::vector<VectorXd>* thetas_out) {
    MultiTaskDataset ds;
    ds.model_kind = ModelKind::Logistic;
    for (int j = 0; j < m; ++j) {
        TaskDataset t;
        t.task_id = j;
        t.design = gaussian_matrix(n, d, rng);
        const VectorXd theta = theta_scale * gaussian_vector(d, rng);
        t.responses.resize(n);
        for (int i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-t.design.row(i).dot(theta)));
            t.responses(i) = rng.uniform() < p ? 1.0 : 0.0;
        }
        if (thetas_out) thetas_out->push_back(theta);
        ds.tasks.push_back(std::move(t));
    }
    return ds;
}

MatrixXd brute_second_moment(const MatrixXd& x) {
    const Index n = x.rows(), d = x.cols();
    MatrixXd s = MatrixXd::Zero(d, d);
    for (Index i = 0; i < n; ++i)
        for (Index a = 0; a < d; ++a)
            for (Index b = 0; b < d; ++b) s(a, b) += x(i, a) * x(i, b);
    return s / static_cast<double>(n);
}

MatrixXd random_psd(int d, int rank, Rng& rng) {
    const MatrixXd g = gaussian_matrix(d, rank, rng);
    return g * g.transpose() / static_cast<double>(std::max(rank, 1));
}

double reference_linear_objective(const MultiTaskDataset& ds, const Hyperparameters& hp,
                                  const std::vector<VectorXd>& thetas, const VectorXd& beta) {
    double total = 0.0;
    for (std::size_t j = 0; j < ds.tasks.size(); ++j) {
        const auto& t = ds.tasks[j];
        const double n = static_cast<double>(t.n());
        double loss = 0.0, pen = 0.0;
        for (Index i = 0; i < t.n(); ++i) {
            double fit = 0.0, dev = 0.0;
            for (Index k = 0; k < t.d(); ++k) {
                fit += t.design(i, k) * thetas[j](k);
                dev += t.design(i, k) * (thetas[j](k) - beta(k));
            }
            loss += (t.responses(i) - fit) * (t.responses(i) - fit);
            pen += dev * dev;
        }
        total += hp.weights[j] * (loss / (2.0 * n) + hp.lambdas[j] * std::sqrt(pen / n));
    }
    return total;
}

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

VectorXd project_ball(const VectorXd& v, double xi) {
    const double n = v.norm();
    return n <= xi ? v : VectorXd(v * (xi / n));
}

struct DeviationProblem {
    // loss value and gradient for task j at theta
    std::function<double(std::size_t, const VectorXd&, VectorXd*)> loss;
    std::vector<MatrixXd> sigma;
    bool euclidean = false;
};

double deviation_objective(const DeviationProblem& p, const Hyperparameters& hp, const std::vector<VectorXd>& v,
                           const VectorXd& beta) {
    double total = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double pen = p.euclidean ? v[j].norm() : std::sqrt(std::max(0.0, v[j].dot(p.sigma[j] * v[j])));
        total += hp.weights[j] * (p.loss(j, beta + v[j], nullptr) + hp.lambdas[j] * pen);
    }
    return total;
}

double run_deviation_subgradient(const DeviationProblem& p, const Hyperparameters& hp, long iterations,
                                 double curvature, double beta_step, std::optional<double> xi) {
    const std::size_t m = p.sigma.size();
    const Index d = p.sigma.front().rows();
    const MatrixXd eye = MatrixXd::Identity(d, d);
    std::vector<MatrixXd> precond;
    MatrixXd pooled = MatrixXd::Zero(d, d);
    for (std::size_t j = 0; j < m; ++j) {
        precond.push_back((hp.weights[j] * curvature * (p.sigma[j] + 1e-12 * eye)).inverse());
        pooled += hp.weights[j] * curvature * p.sigma[j];
    }
    const MatrixXd beta_precond = (pooled + 1e-12 * eye).inverse();

    std::vector<VectorXd> v(m, VectorXd::Zero(d));
    VectorXd beta = VectorXd::Zero(d);
    double best = deviation_objective(p, hp, v, beta);
    auto best_v = v;
    VectorXd best_beta = beta;
    double step = 0.5;
    const long stages = 100;
    const long stage_len = std::max(1L, iterations / stages);
    for (long k = 0; k < iterations; ++k) {
        if (k > 0 && k % stage_len == 0) {
            step *= 0.75;
            v = best_v;
            beta = best_beta;
        }
        VectorXd gb = VectorXd::Zero(d);
        std::vector<VectorXd> gv(m);
        for (std::size_t j = 0; j < m; ++j) {
            VectorXd gl;
            p.loss(j, beta + v[j], &gl);
            gl *= hp.weights[j];
            gb += gl;
            gv[j] = gl;
            if (p.euclidean) {
                const double nv = v[j].norm();
                if (nv > 0) gv[j] += hp.weights[j] * hp.lambdas[j] * v[j] / nv;
            } else {
                const VectorXd sv = p.sigma[j] * v[j];
                const double nv = std::sqrt(std::max(0.0, v[j].dot(sv)));
                if (nv > 0) gv[j] += hp.weights[j] * hp.lambdas[j] * sv / nv;
            }
        }
        for (std::size_t j = 0; j < m; ++j) v[j] -= step * (precond[j] * gv[j]);
        beta -= beta_step * (beta_precond * gb);
        if (xi) {
            beta = project_ball(beta, *xi);
            for (std::size_t j = 0; j < m; ++j) v[j] = project_ball(beta + v[j], *xi) - beta;
        }
        const double f = deviation_objective(p, hp, v, beta);
        if (f < best) {
            best = f;
            best_v = v;
            best_beta = beta;
        }
    }
    return best;
}

} // namespace

double subgradient_linear(const MultiTaskDataset& ds, const Hyperparameters& hp, long iterations) {
    DeviationProblem p;
    for (const auto& t : ds.tasks) p.sigma.push_back(brute_second_moment(t.design));
    p.loss = [&](std::size_t j, const VectorXd& theta, VectorXd* grad) {
        const auto& t = ds.tasks[j];
        const double n = static_cast<double>(t.n());
        const VectorXd r = t.design * theta - t.responses;
        if (grad) *grad = t.design.transpose() * r / n;
        return 0.5 * r.squaredNorm() / n;
    };
    return run_deviation_subgradient(p, hp, iterations, 1.0, 0.5, std::nullopt);
}

double subgradient_glm(const MultiTaskDataset& ds, const Hyperparameters& hp, double xi, long iterations) {
    DeviationProblem p;
    for (const auto& t : ds.tasks) p.sigma.push_back(brute_second_moment(t.design));
    p.loss = [&](std::size_t j, const VectorXd& theta, VectorXd* grad) {
        const auto& t = ds.tasks[j];
        const double n = static_cast<double>(t.n());
        double loss = 0.0;
        VectorXd g = VectorXd::Zero(t.d());
        for (Index i = 0; i < t.n(); ++i) {
            const double z = t.design.row(i).dot(theta);
            loss += softplus(z) - t.responses(i) * z;
            g += (sigmoid(z) - t.responses(i)) * t.design.row(i).transpose();
        }
        if (grad) *grad = g / n;
        return loss / n;
    };
    // logistic curvature is at most 1/4; preconditioning with a quarter of Sigma is the Newton scale
    // near the origin
    return run_deviation_subgradient(p, hp, iterations, 0.25, 0.5, xi);
}

double reference_glm_objective(const MultiTaskDataset& ds, const Hyperparameters& hp,
                               const std::vector<VectorXd>& thetas, const VectorXd& beta, bool euclidean) {
    double total = 0.0;
    for (std::size_t j = 0; j < ds.tasks.size(); ++j) {
        const auto& t = ds.tasks[j];
        const double n = static_cast<double>(t.n());
        double loss = 0.0;
        for (Index i = 0; i < t.n(); ++i) {
            const double z = t.design.row(i).dot(thetas[j]);
            loss += softplus(z) - t.responses(i) * z;
        }
        const VectorXd v = thetas[j] - beta;
        const double pen = euclidean ? v.norm() : (t.design * v).norm() / std::sqrt(n);
        total += hp.weights[j] * (loss / n + hp.lambdas[j] * pen);
    }
    return total;
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
    VectorXd g(x.size());
    VectorXd xp = x, xm = x;
    for (Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

VectorXd newton_logistic(const MatrixXd& x, const VectorXd& y, int max_iters) {
    const Index n = x.rows(), d = x.cols();
    VectorXd theta = VectorXd::Zero(d);
    auto nll = [&](const VectorXd& th) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double z = x.row(i).dot(th);
            s += softplus(z) - y(i) * z;
        }
        return s / n;
    };
    for (int it = 0; it < max_iters; ++it) {
        VectorXd g = VectorXd::Zero(d);
        MatrixXd h = MatrixXd::Zero(d, d);
        for (Index i = 0; i < n; ++i) {
            const double z = x.row(i).dot(theta);
            const double p = sigmoid(z);
            g += (p - y(i)) * x.row(i).transpose();
            h += p * (1 - p) * x.row(i).transpose() * x.row(i);
        }
        g /= n;
        h /= n;
        const VectorXd step = h.ldlt().solve(g);
        double t = 1.0;
        const double f0 = nll(theta);
        while (nll(theta - t * step) > f0 - 1e-4 * t * g.dot(step) && t > 1e-10) t *= 0.5;
        theta -= t * step;
        if (g.norm() < 1e-13) break;
    }
    return theta;
}

} // namespace mtlr::testing
