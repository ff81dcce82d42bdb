#pragma once

#include <functional>

#include "mtlr/task_data.hpp"

namespace mtlr {

/// Returns f(x) and writes the gradient into `grad`.
using ValueGrad = std::function<double(const VectorXd& x, VectorXd& grad)>;
/// Projects onto a closed convex set.
using Projection = std::function<VectorXd(const VectorXd&)>;

struct OptimResult {
    VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct LbfgsOptions {
    int memory = 10;
    int max_iters = 10000;
    double rel_obj_tol = 1e-14;
    double grad_tol = 1e-12;
};

/// Limited-memory BFGS with Armijo backtracking for smooth unconstrained problems.
OptimResult minimize_lbfgs(const ValueGrad& fg, VectorXd x0, const LbfgsOptions& opts = {});

struct FistaOptions {
    int max_iters = 20000;
    double initial_lipschitz = 1.0;
    double rel_obj_tol = 1e-13;
    // Stop once the projected step ||z - y|| falls below step_tol * (1 + ||y||).
    double step_tol = 1e-13;
};

/// Monotone FISTA with backtracking and restarts for min f(x) over a convex set.
/// Every returned iterate is feasible and the objective sequence is nonincreasing.
OptimResult minimize_projected_fista(const ValueGrad& fg, const Projection& project, VectorXd x0,
                                     const FistaOptions& opts = {});

} // namespace mtlr
