#include "mtlr/detail/profile.hpp"

#include <array>
#include <cmath>

namespace mtlr::detail {

namespace {

// Root s > 0 of s * ||b ./ (ev + s)|| = lambda, given ||b|| > lambda.
// Newton on phi(s) = 1/||v(s)|| - s/lambda (concave) from the right converges monotonically.
double secular_shift(const VectorXd& ev, const VectorXd& b, double lambda) {
    const double bnorm = b.norm();
    double s = lambda * std::max(ev.maxCoeff(), 1e-300) / (bnorm - lambda);
    if (!std::isfinite(s)) s = 1e300;
    for (int it = 0; it < 100; ++it) {
        const Eigen::ArrayXd denom = ev.array() + s;
        const Eigen::ArrayXd v = b.array() / denom;
        const double vnorm = std::sqrt((v * v).sum());
        const double phi = 1.0 / vnorm - s / lambda;
        const double dphi = (b.array().square() / denom.cube()).sum() / (vnorm * vnorm * vnorm) - 1.0 / lambda;
        if (dphi >= 0.0) break;
        const double next = s - phi / dphi;
        if (!(next > 0.0)) {
            s *= 0.5;
            continue;
        }
        const bool done = std::abs(next - s) <= 1e-15 * s;
        s = next;
        if (done) break;
    }
    return s;
}

} // namespace

VectorXd armul_theta_step(const TaskGeometry& geom, const VectorXd& ols, const VectorXd& beta, double lambda) {
    ProfileTask t{&geom, ols, 1.0, lambda};
    return evaluate_envelope(t, beta, PenaltyMetric::Euclidean, false).theta;
}

TaskEnvelope evaluate_envelope(const ProfileTask& task, const VectorXd& beta, PenaltyMetric metric, bool want_hess) {
    const TaskGeometry& g = *task.geom;
    const auto basis = g.range_basis();
    const VectorXd ev = g.range_eigenvalues();
    const double lambda = task.lambda;
    const Index d = beta.size();
    TaskEnvelope out;

    if (metric == PenaltyMetric::Seminorm) {
        const VectorXd root = ev.cwiseSqrt();
        const VectorXd coords = basis.transpose() * (beta - task.ols);
        const VectorXd u = root.cwiseProduct(coords);
        const double s = u.norm();
        if (s <= lambda) {
            out.value = 0.5 * s * s;
            out.grad = basis * root.cwiseProduct(u);
            out.theta = beta;
            if (want_hess) out.hess = g.sigma();
        } else {
            out.value = lambda * s - 0.5 * lambda * lambda;
            out.grad = basis * root.cwiseProduct(u) * (lambda / s);
            // theta - beta = (1 - lambda/s) P (ols - beta)
            out.theta = beta - (1.0 - lambda / s) * (basis * coords);
            if (want_hess) {
                const VectorXd dir = basis * root.cwiseProduct(u / s);
                out.hess = (lambda / s) * (g.sigma() - dir * dir.transpose());
            }
        }
        return out;
    }

    // Euclidean penalty: v = theta - beta solves Sigma (v - a) + lambda v / ||v|| = 0, a = ols - beta.
    const VectorXd c = basis.transpose() * (task.ols - beta);
    const VectorXd b = ev.cwiseProduct(c);
    if (!(lambda > 0.0)) {
        out.value = 0.0;
        out.grad = VectorXd::Zero(d);
        out.theta = beta + basis * c;
        if (want_hess) out.hess = MatrixXd::Zero(d, d);
        return out;
    }
    if (b.norm() <= lambda) {
        out.value = 0.5 * c.dot(ev.cwiseProduct(c));
        out.grad = -(basis * b);
        out.theta = beta;
        if (want_hess) out.hess = g.sigma();
        return out;
    }
    const double s = secular_shift(ev, b, lambda);
    const VectorXd v = b.cwiseQuotient((ev.array() + s).matrix());
    const double t = v.norm();
    const VectorXd resid = v - c;
    out.value = 0.5 * resid.dot(ev.cwiseProduct(resid)) + lambda * t;
    out.grad = basis * ev.cwiseProduct(resid);
    out.theta = beta + basis * v;
    if (want_hess) {
        const Index r = ev.size();
        const VectorXd vhat = v / t;
        MatrixXd k = s * (MatrixXd::Identity(r, r) - vhat * vhat.transpose());
        k.diagonal() += ev;
        const MatrixXd kinv_ev = k.ldlt().solve(MatrixXd(ev.asDiagonal()));
        MatrixXd hr = -(ev.asDiagonal() * kinv_ev);
        hr.diagonal() += ev;
        hr = 0.5 * (hr + hr.transpose());
        out.hess = basis * hr * basis.transpose();
    }
    return out;
}

ProfileSolution minimize_profile(const std::vector<ProfileTask>& tasks, VectorXd beta0, PenaltyMetric metric,
                                 int max_iters, double rel_tol) {
    ProfileSolution sol;
    const Index d = beta0.size();

    MatrixXd majorizer = MatrixXd::Zero(d, d);
    for (const auto& t : tasks) {
        if (t.lambda > 0.0) majorizer += t.weight * t.geom->sigma();
    }
    const auto maj = TaskGeometry::from_matrix(majorizer);
    const MatrixXd basis = maj.range_basis();
    const VectorXd maj_ev = maj.range_eigenvalues();
    const Index r = maj.rank();

    auto evaluate = [&](const VectorXd& beta, bool want_hess, VectorXd* grad, MatrixXd* hess) {
        double total = 0.0;
        if (grad) grad->setZero(d);
        if (hess) hess->setZero(d, d);
        for (const auto& t : tasks) {
            if (!(t.lambda > 0.0)) continue;
            const auto env = evaluate_envelope(t, beta, metric, want_hess);
            total += t.weight * env.value;
            if (grad) *grad += t.weight * env.grad;
            if (hess) *hess += t.weight * env.hess;
        }
        return total;
    };

    VectorXd beta = std::move(beta0);
    double value = evaluate(beta, false, nullptr, nullptr);
    sol.history.push_back(value);

    // Levenberg-style damping levels; the last one (tau = 1) always satisfies Armijo because the
    // profile Hessian never exceeds the majorizer.
    constexpr std::array<double, 6> kDamping = {1e-12, 1e-8, 1e-5, 1e-3, 1e-1, 1.0};
    int level = 0;

    if (r == 0) {
        sol.converged = true;
    }
    for (int it = 0; it < max_iters && r > 0; ++it) {
        sol.iterations = it + 1;
        VectorXd grad;
        MatrixXd hess;
        evaluate(beta, true, &grad, &hess);
        const VectorXd g_r = basis.transpose() * grad;
        if (g_r.squaredNorm() == 0.0) {
            sol.converged = true;
            break;
        }
        const MatrixXd h_r = basis.transpose() * hess * basis;

        bool accepted = false;
        double new_value = value;
        VectorXd new_beta;
        int used = level;
        for (int lv = level; lv < static_cast<int>(kDamping.size()); ++lv) {
            MatrixXd a = h_r;
            a.diagonal() += kDamping[lv] * maj_ev;
            const VectorXd step_r = a.ldlt().solve(-g_r);
            if (!step_r.allFinite()) continue;
            const double slope = g_r.dot(step_r);
            if (!(slope < 0.0)) continue;
            VectorXd candidate = beta + basis * step_r;
            const double cand_value = evaluate(candidate, false, nullptr, nullptr);
            if (cand_value <= value + 1e-4 * slope) {
                accepted = true;
                new_value = cand_value;
                new_beta = std::move(candidate);
                used = lv;
                break;
            }
        }
        if (!accepted) {
            // No representable decrease left.
            sol.converged = true;
            break;
        }
        const double decrease = value - new_value;
        beta = std::move(new_beta);
        value = new_value;
        sol.history.push_back(value);
        level = std::max(0, used - 1);
        if (decrease <= rel_tol * (1.0 + std::abs(value)) && used <= 2) {
            sol.converged = true;
            break;
        }
    }

    sol.beta = beta;
    sol.thetas.reserve(tasks.size());
    for (const auto& t : tasks) {
        sol.thetas.push_back(evaluate_envelope(t, beta, metric, false).theta);
    }
    return sol;
}

} // namespace mtlr::detail
