#include "mtlr/optim.hpp"

#include <cmath>
#include <deque>

namespace mtlr {

OptimResult minimize_lbfgs(const ValueGrad& fg, VectorXd x0, const LbfgsOptions& opts) {
    OptimResult res;
    VectorXd x = std::move(x0);
    VectorXd g(x.size());
    double f = fg(x, g);
    std::deque<VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    int small_steps = 0;

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it + 1;
        if (g.norm() <= opts.grad_tol * (1.0 + std::abs(f))) {
            res.converged = true;
            break;
        }
        // Two-loop recursion.
        VectorXd dir = -g;
        std::vector<double> alpha(s_hist.size());
        for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
            alpha[k] = rho_hist[k] * s_hist[k].dot(dir);
            dir -= alpha[k] * y_hist[k];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            dir *= gamma;
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double b = rho_hist[k] * y_hist[k].dot(dir);
            dir += s_hist[k] * (alpha[k] - b);
        }
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        VectorXd x_new(x.size()), g_new(x.size());
        double f_new = f;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = x + step * dir;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = true;  // no further decrease representable
            break;
        }
        const VectorXd s = x_new - x;
        const VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-16 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const double change = f - f_new;
        x = std::move(x_new);
        g = g_new;
        f = f_new;
        small_steps = (change <= opts.rel_obj_tol * (1.0 + std::abs(f))) ? small_steps + 1 : 0;
        if (small_steps >= 3) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.value = f;
    return res;
}

OptimResult minimize_projected_fista(const ValueGrad& fg, const Projection& project, VectorXd x0,
                                     const FistaOptions& opts) {
    OptimResult res;
    VectorXd x = project(x0);
    VectorXd gx(x.size());
    double fx = fg(x, gx);
    VectorXd y = x;
    VectorXd gy = gx;
    double fy = fx;
    double t = 1.0;
    double lip = opts.initial_lipschitz;
    int quiet = 0;

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it + 1;
        VectorXd z, gz(x.size());
        double fz = 0.0;
        for (int bt = 0; bt < 100; ++bt) {
            z = project(y - gy / lip);
            fz = fg(z, gz);
            const VectorXd diff = z - y;
            if (fz <= fy + gy.dot(diff) + 0.5 * lip * diff.squaredNorm() + 1e-15 * std::abs(fy)) break;
            lip *= 2.0;
        }
        const double step_norm = (z - y).norm();
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        VectorXd x_prev = x;
        const double f_prev = fx;
        if (fz <= fx) {
            x = z;
            fx = fz;
            gx = gz;
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
        } else {
            // Objective went up: keep x and restart momentum.
            t = 1.0;
            y = x;
        }
        if (y.isApprox(x, 0.0)) {
            fy = fx;
            gy = gx;
        } else {
            fy = fg(y, gy);
        }
        lip *= 0.95;

        if (step_norm <= opts.step_tol * (1.0 + y.norm())) {
            res.converged = true;
            break;
        }
        const double change = f_prev - fx;
        quiet = (change <= opts.rel_obj_tol * (1.0 + std::abs(fx))) ? quiet + 1 : 0;
        if (quiet >= 20) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

} // namespace mtlr
