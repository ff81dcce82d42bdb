#include "mtlr/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "mtlr/baselines.hpp"
#include "mtlr/error.hpp"
#include "mtlr/rng.hpp"
#include "mtlr/solver_linear.hpp"
#include "mtlr/synthetic.hpp"

namespace mtlr {

namespace {

constexpr std::uint64_t kFoldTag = 0xF01D;
constexpr std::uint64_t kTestTag = 0x7E57;
constexpr std::uint64_t kCvTag = 0xC5;

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index writes its own slot,
// so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, int threads, F&& body) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void apply_sweep_value(SynthConfig& cfg, Mode mode, double value) {
    switch (mode) {
        case Mode::SweepDelta: cfg.delta = value; break;
        case Mode::SweepEps: cfg.eps = value; break;
        case Mode::SweepAlpha: cfg.alpha = value; break;
        case Mode::SweepBalancedness: cfg.W = value; break;
        default: throw Error(ErrorCode::ConfigError, "not a sweep mode");
    }
}

} // namespace

double in_sample_mse(const TaskGeometry& geom, const VectorXd& theta_hat, const VectorXd& theta_star) {
    const double s = seminorm(geom, theta_hat - theta_star);
    return s * s;
}

double population_mse(const MatrixXd& population_cov, const VectorXd& theta_hat, const VectorXd& theta_star) {
    const VectorXd diff = theta_hat - theta_star;
    return std::max(0.0, diff.dot(population_cov * diff));
}

double classification_error(const GlmSpec& spec, const VectorXd& theta, const MatrixXd& design, const VectorXd& labels) {
    if (labels.size() == 0) return 0.0;
    const VectorXd z = design * theta;
    int wrong = 0;
    for (Index i = 0; i < z.size(); ++i) {
        const double pred = spec.link(z(i)) >= 0.5 ? 1.0 : 0.0;
        if (pred != labels(i)) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

FitResult fit_method(const MultiTaskDataset& ds, const std::vector<TaskGeometry>& geoms, Method method, double q,
                     WeightScheme scheme, const GlmSpec& spec) {
    switch (method) {
        case Method::Itl: return fit_itl(ds, &spec);
        case Method::Dp: return fit_dp(ds, &spec);
        case Method::Armul: {
            auto hp = Hyperparameters::from_schedule(ds, q, scheme);
            hp.xi = spec.xi;
            return fit_armul(ds, geoms, hp, &spec);
        }
        case Method::Mtlr: {
            auto hp = Hyperparameters::from_schedule(ds, q, scheme);
            hp.xi = spec.xi;
            return ds.model_kind == ModelKind::Linear ? fit_mtlr_linear(ds, geoms, hp) : fit_mtlr_glm(ds, geoms, spec, hp);
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown method");
}

std::vector<std::vector<std::vector<int>>> per_task_folds(const MultiTaskDataset& ds, int k, std::uint64_t seed) {
    std::vector<std::vector<std::vector<int>>> folds(k, std::vector<std::vector<int>>(ds.m()));
    for (Index j = 0; j < ds.m(); ++j) {
        const int n = static_cast<int>(ds.tasks[j].n());
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(seed, kFoldTag, static_cast<std::uint64_t>(j));
        rng.shuffle(idx.begin(), idx.end());
        for (int f = 0; f < k; ++f) {
            const int lo = static_cast<int>(static_cast<long long>(f) * n / k);
            const int hi = static_cast<int>(static_cast<long long>(f + 1) * n / k);
            folds[f][j].assign(idx.begin() + lo, idx.begin() + hi);
            std::sort(folds[f][j].begin(), folds[f][j].end());
        }
    }
    return folds;
}

MultiTaskDataset subset_rows(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows) {
    MultiTaskDataset out;
    out.model_kind = ds.model_kind;
    for (Index j = 0; j < ds.m(); ++j) {
        const auto& src = ds.tasks[j];
        TaskDataset t;
        t.task_id = src.task_id;
        t.design.resize(static_cast<Index>(rows[j].size()), src.d());
        t.responses.resize(static_cast<Index>(rows[j].size()));
        for (std::size_t i = 0; i < rows[j].size(); ++i) {
            t.design.row(static_cast<Index>(i)) = src.design.row(rows[j][i]);
            t.responses(static_cast<Index>(i)) = src.responses(rows[j][i]);
        }
        out.tasks.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<int>> complement_rows(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows) {
    std::vector<std::vector<int>> out(ds.m());
    for (Index j = 0; j < ds.m(); ++j) {
        std::vector<char> taken(static_cast<std::size_t>(ds.tasks[j].n()), 0);
        for (int i : rows[j]) taken[static_cast<std::size_t>(i)] = 1;
        for (int i = 0; i < static_cast<int>(taken.size()); ++i) {
            if (!taken[static_cast<std::size_t>(i)]) out[j].push_back(i);
        }
    }
    return out;
}

double held_out_score(const MultiTaskDataset& ds, const std::vector<std::vector<int>>& rows,
                      const std::vector<VectorXd>& thetas, const GlmSpec& spec) {
    double total = 0.0;
    int counted = 0;
    for (Index j = 0; j < ds.m(); ++j) {
        if (rows[j].empty()) continue;
        double s = 0.0;
        for (int i : rows[j]) {
            const double z = ds.tasks[j].design.row(i).dot(thetas[j]);
            const double y = ds.tasks[j].responses(i);
            s += ds.model_kind == ModelKind::Linear ? (y - z) * (y - z) : spec.psi(z) - y * z;
        }
        total += s / static_cast<double>(rows[j].size());
        ++counted;
    }
    return counted ? total / counted : 0.0;
}

CvResult kfold_cv_q(const MultiTaskDataset& ds, Method method, const std::vector<double>& q_grid, int k,
                    std::uint64_t seed, WeightScheme scheme, const GlmSpec& spec) {
    if (q_grid.empty()) throw Error(ErrorCode::ConfigError, "empty q grid");
    if (k < 2) throw Error(ErrorCode::ConfigError, "k must be at least 2");
    for (const auto& t : ds.tasks) {
        if (t.n() < k) {
            throw Error(ErrorCode::TooFewSamples,
                        "task " + std::to_string(t.task_id) + " has fewer than " + std::to_string(k) + " samples");
        }
    }
    CvResult res;
    res.scores.assign(q_grid.size(), 0.0);
    const auto folds = per_task_folds(ds, k, seed);
    for (int f = 0; f < k; ++f) {
        const auto train = subset_rows(ds, complement_rows(ds, folds[f]));
        const auto geoms = second_moments(train);
        for (std::size_t g = 0; g < q_grid.size(); ++g) {
            const auto fit = fit_method(train, geoms, method, q_grid[g], scheme, spec);
            res.scores[g] += held_out_score(ds, folds[f], fit.thetas, spec) / k;
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < q_grid.size(); ++g) {
        if (res.scores[g] < res.scores[best] || (res.scores[g] == res.scores[best] && q_grid[g] < q_grid[best])) best = g;
    }
    res.q_best = q_grid[best];
    return res;
}

const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols{"method",      "sweep_value", "replicate",  "mse_all",
                                               "mse_related", "mse_outlier", "insample_all", "error_rate",
                                               "runtime_seconds", "chosen_q", "converged"};
    return cols;
}

SplitMse split_mse(const std::vector<double>& per_task, const std::vector<bool>& inlier_mask) {
    SplitMse s;
    double rel = 0.0, out = 0.0;
    int nrel = 0, nout = 0;
    for (std::size_t j = 0; j < per_task.size(); ++j) {
        if (inlier_mask[j]) {
            rel += per_task[j];
            ++nrel;
        } else {
            out += per_task[j];
            ++nout;
        }
    }
    s.all = mean_of(per_task);
    if (nrel) s.related = rel / nrel;
    if (nout) s.outlier = out / nout;
    return s;
}

MetricsTable run_sweep(const ExperimentConfig& exp) {
    if (!is_sweep(exp.mode)) throw Error(ErrorCode::ConfigError, "run_sweep needs a sweep mode");
    const std::size_t nv = exp.sweep_values.size();
    const std::size_t nr = static_cast<std::size_t>(exp.reps);
    const std::size_t nm = exp.methods.size();
    std::vector<MetricsRow> slots(nv * nr * nm);
    const GlmSpec spec = GlmSpec::logistic(exp.xi);

    parallel_for(nv * nr, exp.threads, [&](std::size_t item) {
        const std::size_t s = item / nr;
        const std::size_t r = item % nr;
        auto row_at = [&](std::size_t mi) -> MetricsRow& { return slots[(mi * nv + s) * nr + r]; };
        for (std::size_t mi = 0; mi < nm; ++mi) {
            auto& row = row_at(mi);
            row.method = exp.methods[mi];
            row.sweep_value = exp.sweep_values[s];
            row.replicate = static_cast<int>(r);
            row.converged = false;
        }
        SynthProblem prob;
        try {
            SynthConfig cfg = exp.synth;
            apply_sweep_value(cfg, exp.mode, exp.sweep_values[s]);
            cfg.seed = stream_key(exp.seed, s);
            prob = generate_problem(cfg, r);
        } catch (const std::exception&) {
            return;
        }
        const auto geoms = second_moments(prob.dataset);
        const std::uint64_t cv_seed = stream_key(exp.seed, s, r, kCvTag);
        for (std::size_t mi = 0; mi < nm; ++mi) {
            auto& row = row_at(mi);
            try {
                const auto t0 = std::chrono::steady_clock::now();
                const Method method = exp.methods[mi];
                double q = 0.0;
                if (needs_tuning(method)) {
                    q = kfold_cv_q(prob.dataset, method, exp.q_grid, exp.k_folds, cv_seed, exp.weights, spec).q_best;
                    row.chosen_q = q;
                }
                const auto fit = fit_method(prob.dataset, geoms, method, q, exp.weights, spec);
                std::vector<double> pop, ins;
                for (int j = 0; j < prob.dataset.m(); ++j) {
                    pop.push_back(population_mse(prob.population_covariances[j], fit.thetas[j], prob.true_thetas[j]));
                    ins.push_back(in_sample_mse(geoms[j], fit.thetas[j], prob.true_thetas[j]));
                }
                const auto split = split_mse(pop, prob.inlier_mask);
                row.mse_all = split.all;
                row.mse_related = split.related;
                row.mse_outlier = split.outlier;
                row.insample_all = mean_of(ins);
                row.converged = fit.converged;
                if (exp.record_runtime) {
                    row.runtime_seconds =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
            } catch (const std::exception&) {
                row.converged = false;
            }
        }
    });

    MetricsTable table;
    table.sweep_name = std::string(to_string(exp.mode));
    table.rows = std::move(slots);
    return table;
}

std::vector<std::vector<int>> test_split(const MultiTaskDataset& ds, double test_fraction, std::uint64_t seed,
                                         int split) {
    std::vector<std::vector<int>> out(ds.m());
    for (Index j = 0; j < ds.m(); ++j) {
        const int n = static_cast<int>(ds.tasks[j].n());
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(seed, kTestTag, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(j));
        rng.shuffle(idx.begin(), idx.end());
        const int take = std::min(n, static_cast<int>(std::ceil(test_fraction * n - 1e-12)));
        out[j].assign(idx.begin(), idx.begin() + take);
        std::sort(out[j].begin(), out[j].end());
    }
    return out;
}

Standardizer Standardizer::fit(const MultiTaskDataset& train) {
    const Index d = train.d();
    Standardizer s;
    s.mean = VectorXd::Zero(d);
    VectorXd sq = VectorXd::Zero(d);
    double count = 0.0;
    for (const auto& t : train.tasks) {
        s.mean += t.design.colwise().sum().transpose();
        count += static_cast<double>(t.n());
    }
    s.mean /= count;
    for (const auto& t : train.tasks) sq += (t.design.rowwise() - s.mean.transpose()).colwise().squaredNorm().transpose();
    s.scale = (sq / count).cwiseSqrt();
    for (Index k = 0; k < d; ++k) {
        if (!(s.scale(k) > 0.0)) s.scale(k) = 1.0;
    }
    return s;
}

void Standardizer::apply(MultiTaskDataset& ds) const {
    for (auto& t : ds.tasks) {
        t.design = ((t.design.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    }
}

MetricsTable run_har(const MultiTaskDataset& ds, const ExperimentConfig& exp) {
    validate_dataset(ds);
    const GlmSpec spec = GlmSpec::logistic(exp.xi);
    const std::size_t splits = static_cast<std::size_t>(exp.reps);
    const std::size_t nm = exp.methods.size();
    std::vector<MetricsRow> slots(nm * splits);

    parallel_for(splits, exp.threads, [&](std::size_t s) {
        const auto test_rows = test_split(ds, exp.test_fraction, exp.seed, static_cast<int>(s));
        MultiTaskDataset train = subset_rows(ds, complement_rows(ds, test_rows));
        MultiTaskDataset test = subset_rows(ds, test_rows);
        if (exp.standardize) {
            const auto st = Standardizer::fit(train);
            st.apply(train);
            st.apply(test);
        }
        const auto geoms = second_moments(train);
        const std::uint64_t cv_seed = stream_key(exp.seed, s, 0, kCvTag);
        for (std::size_t mi = 0; mi < nm; ++mi) {
            auto& row = slots[mi * splits + s];
            row.method = exp.methods[mi];
            row.sweep_value = 0.0;
            row.replicate = static_cast<int>(s);
            try {
                const auto t0 = std::chrono::steady_clock::now();
                double q = 0.0;
                if (needs_tuning(row.method)) {
                    q = kfold_cv_q(train, row.method, exp.q_grid, exp.k_folds, cv_seed, exp.weights, spec).q_best;
                    row.chosen_q = q;
                }
                const auto fit = fit_method(train, geoms, row.method, q, exp.weights, spec);
                double err = 0.0;
                for (Index j = 0; j < test.m(); ++j) {
                    err += classification_error(spec, fit.thetas[j], test.tasks[j].design, test.tasks[j].responses);
                }
                row.error_rate = err / static_cast<double>(test.m());
                row.converged = fit.converged;
                if (exp.record_runtime) {
                    row.runtime_seconds =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
            } catch (const std::exception&) {
                row.converged = false;
            }
        }
    });

    MetricsTable table;
    table.sweep_name = "har";
    table.rows = std::move(slots);
    return table;
}

} // namespace mtlr
