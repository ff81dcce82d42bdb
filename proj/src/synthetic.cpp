#include "mtlr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtlr/error.hpp"

namespace mtlr {

namespace {

// stream tags within a replicate
constexpr std::uint64_t kParamStream = 1;
constexpr std::uint64_t kTaskStream = 2;
constexpr std::uint64_t kSpikeStream = 3;

VectorXd sample_sphere(int d, Rng& rng) {
    VectorXd v(d);
    double norm = 0.0;
    while (norm == 0.0) {
        for (int k = 0; k < d; ++k) v(k) = rng.normal();
        norm = v.norm();
    }
    return v / norm;
}

std::vector<int> choose_without_replacement(int pool, int count, Rng& rng) {
    std::vector<int> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

VectorXd linear_responses(const MatrixXd& x, const VectorXd& theta, double noise_sd, Rng& rng) {
    VectorXd y = x * theta;
    for (Index i = 0; i < y.size(); ++i) y(i) += noise_sd * rng.normal();
    return y;
}

} // namespace

SynthConfig SynthConfig::spiked(double W, std::uint64_t seed) {
    SynthConfig c;
    c.mode = SynthMode::SpikedBalancedness;
    c.m = 50;
    c.eps = 0.5;
    c.delta = 0.5;
    c.W = W;
    c.seed = seed;
    return c;
}

int SynthConfig::outlier_count() const { return static_cast<int>(std::floor(eps * m + 1e-12)); }

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (n < 1 || m < 1 || d < 1) fail("n, m, d must be positive");
    if (!(delta >= 0.0)) fail("delta must be nonnegative");
    if (!(eps >= 0.0 && eps < 1.0)) fail("eps must lie in [0, 1)");
    if (!(alpha >= 0.0)) fail("alpha must be nonnegative");
    if (!(r_out >= 0.0) || !(noise_sd >= 0.0)) fail("r_out and noise_sd must be nonnegative");
    if (inlier_count() < 1) fail("at least one inlier task is required");
    if (mode == SynthMode::SpikedBalancedness) {
        if (!(W >= 1.0)) fail("W must be at least 1");
        if (d < 2) fail("spiked mode needs d >= 2");
    }
}

std::pair<MatrixXd, MatrixXd> sample_decay_covariates(int n, int d, double alpha, Rng& rng) {
    VectorXd scale(d);
    for (int k = 0; k < d; ++k) scale(k) = std::pow(static_cast<double>(k + 1), -alpha);
    MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) x.row(i) = sample_sphere(d, rng).cwiseProduct(scale).transpose();
    MatrixXd cov = MatrixXd(scale.cwiseAbs2().asDiagonal()) / static_cast<double>(d);
    return {std::move(x), std::move(cov)};
}

VectorXd sample_upper_hemisphere(int d, Rng& rng) {
    VectorXd u = sample_sphere(d, rng);
    u(d - 1) = std::abs(u(d - 1));
    return u;
}

TaskParams sample_task_params(const SynthConfig& cfg, Rng& rng) {
    TaskParams out;
    out.theta_star = sample_sphere(cfg.d, rng);
    out.inlier_mask.assign(cfg.m, true);
    for (int j : choose_without_replacement(cfg.m, cfg.outlier_count(), rng)) out.inlier_mask[j] = false;
    for (int j = 0; j < cfg.m; ++j) {
        const VectorXd u = sample_upper_hemisphere(cfg.d, rng);
        out.true_thetas.push_back(out.inlier_mask[j] ? VectorXd(out.theta_star + cfg.delta * u)
                                                     : VectorXd(cfg.r_out * u));
    }
    return out;
}

SpikedEta spiked_eta(double W, int inlier_count) {
    SpikedEta s;
    s.r = static_cast<int>(std::floor(inlier_count / W + 1e-12));
    s.p = static_cast<double>(s.r) / inlier_count;
    if (s.p >= 1.0) {
        s.degenerate = true;
        s.eta = 0.0;
        return s;
    }
    s.eta = std::clamp((1.0 / W - s.p) / (1.0 - s.p), 0.0, 1.0);
    return s;
}

SynthProblem generate_problem(const SynthConfig& cfg, std::uint64_t replicate) {
    cfg.validate();
    SynthProblem prob;
    Rng param_rng(cfg.seed, replicate, kParamStream);
    auto params = sample_task_params(cfg, param_rng);
    prob.theta_star = std::move(params.theta_star);
    prob.true_thetas = std::move(params.true_thetas);
    prob.inlier_mask = std::move(params.inlier_mask);
    prob.dataset.model_kind = ModelKind::Linear;

    std::vector<int> group(cfg.m, 0);  // 0 -> e1, 1 -> e2
    double eta = 0.0;
    if (cfg.mode == SynthMode::SpikedBalancedness) {
        const auto s = spiked_eta(cfg.W, cfg.inlier_count());
        eta = s.eta;
        std::vector<int> inliers;
        for (int j = 0; j < cfg.m; ++j) {
            if (prob.inlier_mask[j]) inliers.push_back(j);
        }
        Rng spike_rng(cfg.seed, replicate, kSpikeStream);
        for (int k : choose_without_replacement(static_cast<int>(inliers.size()), s.r, spike_rng)) group[inliers[k]] = 1;
    }

    for (int j = 0; j < cfg.m; ++j) {
        Rng rng(cfg.seed, replicate, kTaskStream, static_cast<std::uint64_t>(j));
        TaskDataset task;
        task.task_id = j;
        MatrixXd cov;
        if (cfg.mode == SynthMode::DecaySphere) {
            auto [x, c] = sample_decay_covariates(cfg.n, cfg.d, cfg.alpha, rng);
            task.design = std::move(x);
            cov = std::move(c);
        } else {
            const int g = group[j];
            const double floor_sd = std::sqrt(eta);
            task.design.resize(cfg.n, cfg.d);
            for (int i = 0; i < cfg.n; ++i) {
                for (int k = 0; k < cfg.d; ++k) {
                    const double z = rng.normal();
                    task.design(i, k) = k == g ? z : floor_sd * z;
                }
            }
            cov = eta * MatrixXd::Identity(cfg.d, cfg.d);
            cov(g, g) = 1.0;
        }
        task.responses = linear_responses(task.design, prob.true_thetas[j], cfg.noise_sd, rng);
        prob.dataset.tasks.push_back(std::move(task));
        prob.population_covariances.push_back(std::move(cov));
    }
    return prob;
}

} // namespace mtlr
