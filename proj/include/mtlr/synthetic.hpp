#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mtlr/rng.hpp"
#include "mtlr/task_data.hpp"

namespace mtlr {

enum class SynthMode { DecaySphere, SpikedBalancedness };

struct SynthConfig {
    int n = 100;
    int m = 30;
    int d = 30;
    double delta = 0.2;
    double eps = 0.1;
    double alpha = 1.0;
    double r_out = 10.0;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;
    SynthMode mode = SynthMode::DecaySphere;
    double W = 5.0;  // spiked mode only

    /// Stress-test defaults: m = 50, eps = 0.5, delta = 0.5.
    static SynthConfig spiked(double W, std::uint64_t seed = 0);

    int outlier_count() const;
    int inlier_count() const { return m - outlier_count(); }

    /// Throws ConfigError on inconsistent fields.
    void validate() const;
};

struct SynthProblem {
    MultiTaskDataset dataset;
    std::vector<VectorXd> true_thetas;
    std::vector<bool> inlier_mask;
    std::vector<MatrixXd> population_covariances;
    VectorXd theta_star;
};

/// Rows uniform on the unit sphere, coordinate k scaled by k^{-alpha}. Returns (design, population covariance).
std::pair<MatrixXd, MatrixXd> sample_decay_covariates(int n, int d, double alpha, Rng& rng);

/// Uniform on {u : ||u|| = 1, u_d >= 0}.
VectorXd sample_upper_hemisphere(int d, Rng& rng);

struct TaskParams {
    VectorXd theta_star;
    std::vector<VectorXd> true_thetas;
    std::vector<bool> inlier_mask;
};

TaskParams sample_task_params(const SynthConfig& cfg, Rng& rng);

struct SpikedEta {
    double eta = 0.0;
    double p = 0.0;
    int r = 0;
    bool degenerate = false;  // p == 1, eta forced to 0
};

SpikedEta spiked_eta(double W, int inlier_count);

/// Fully determined by (cfg, replicate).
SynthProblem generate_problem(const SynthConfig& cfg, std::uint64_t replicate = 0);

} // namespace mtlr
