#include "dcrr/prox_solver.hpp"

#include <cmath>
#include <stdexcept>

#include "dcrr/penalty.hpp"

namespace dcrr {

namespace {

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("prox_solver: non-finite ") + what);
}

Eigen::VectorXd prox_l1(const Eigen::VectorXd& z, const Eigen::VectorXd& w, double step) {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) out[j] = soft_threshold(z[j], step * w[j]);
    return out;
}

double composite(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double smooth_val) {
    double pen = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) pen += w[j] * std::abs(x[j]);
    return smooth_val + pen;
}

}  // namespace

SolveResult solve_weighted_l1(const SmoothOracle& oracle, const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& init, const SolveConfig& cfg) {
    if (weights.size() != oracle.p)
        throw std::invalid_argument("solve_weighted_l1: weights length mismatch");
    if (init.size() != oracle.p)
        throw std::invalid_argument("solve_weighted_l1: init length mismatch");

    Eigen::VectorXd x = init;
    Eigen::VectorXd y = x;
    double t = 1.0;
    double L = 1.0 / cfg.init_step;

    double fx = oracle.loss(x);
    check_finite(fx, "loss");
    double Fx = composite(weights, x, fx);

    SolveResult res;
    res.trace.push_back(Fx);

    // One backtracked proximal step from `base`; returns the accepted point
    // and leaves L at the accepted curvature estimate.
    auto prox_step = [&](const Eigen::VectorXd& base, double f_base, const Eigen::VectorXd& g_base,
                         Eigen::VectorXd& out, double& f_out) {
        for (int bt = 0; bt < 80; ++bt) {
            out = prox_l1(base - g_base / L, weights, 1.0 / L);
            f_out = oracle.loss(out);
            check_finite(f_out, "loss");
            const Eigen::VectorXd d = out - base;
            if (f_out <= f_base + g_base.dot(d) + 0.5 * L * d.squaredNorm() + 1e-14) return;
            L /= cfg.backtrack_factor;
        }
        throw std::runtime_error("prox_solver: backtracking failed to find a valid step");
    };

    for (int k = 1; k <= cfg.max_iter; ++k) {
        res.iters = k;
        const double fy = oracle.loss(y);
        check_finite(fy, "loss");
        Eigen::VectorXd gy = oracle.grad(y);
        check_finite(gy.lpNorm<Eigen::Infinity>(), "gradient");

        Eigen::VectorXd x_new;
        double fx_new;
        prox_step(y, fy, gy, x_new, fx_new);
        double Fx_new = composite(weights, x_new, fx_new);

        // prox residual relative to the extrapolated point; a small value
        // certifies the KKT subgradient conditions up to O(L * residual)
        double residual = L * (x_new - y).lpNorm<Eigen::Infinity>();

        if (Fx_new > Fx) {
            // acceleration overshot: restart momentum and take a plain
            // descent step from the last accepted iterate
            const Eigen::VectorXd gx = oracle.grad(x);
            prox_step(x, fx, gx, x_new, fx_new);
            Fx_new = composite(weights, x_new, fx_new);
            residual = L * (x_new - x).lpNorm<Eigen::Infinity>();
            t = 1.0;
            y = x_new;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = x_new + ((t - 1.0) / t_next) * (x_new - x);
            t = t_next;
        }

        x = x_new;
        fx = fx_new;
        Fx = Fx_new;
        res.trace.push_back(Fx);

        if (residual <= 3.0 * cfg.tol * (1.0 + std::abs(Fx))) {
            res.beta = x;
            res.converged = true;
            return res;
        }
    }
    res.beta = x;
    res.converged = false;
    return res;
}

SolveResult solve_restricted(const SmoothOracle& oracle, const std::vector<Eigen::Index>& support,
                             const Eigen::VectorXd& init, const SolveConfig& cfg) {
    if (support.empty()) throw std::invalid_argument("solve_restricted: empty support");
    for (Eigen::Index j : support)
        if (j < 0 || j >= oracle.p) throw std::invalid_argument("solve_restricted: index out of range");

    Eigen::VectorXd mask = Eigen::VectorXd::Zero(oracle.p);
    for (Eigen::Index j : support) mask[j] = 1.0;

    Eigen::VectorXd x = init.cwiseProduct(mask);
    Eigen::VectorXd y = x;
    double t = 1.0;
    double L = 1.0 / cfg.init_step;

    double fx = oracle.loss(x);
    check_finite(fx, "loss");

    SolveResult res;
    res.trace.push_back(fx);

    auto grad_step = [&](const Eigen::VectorXd& base, double f_base, const Eigen::VectorXd& g_base,
                         Eigen::VectorXd& out, double& f_out) {
        for (int bt = 0; bt < 80; ++bt) {
            out = base - g_base / L;
            f_out = oracle.loss(out);
            check_finite(f_out, "loss");
            const Eigen::VectorXd d = out - base;
            if (f_out <= f_base + g_base.dot(d) + 0.5 * L * d.squaredNorm() + 1e-14) return;
            L /= cfg.backtrack_factor;
        }
        throw std::runtime_error("prox_solver: backtracking failed to find a valid step");
    };

    const double gtol = 10.0 * cfg.tol;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        res.iters = k;
        Eigen::VectorXd gx = oracle.grad(x).cwiseProduct(mask);
        if (gx.norm() <= gtol) {
            res.beta = x;
            res.converged = true;
            return res;
        }

        const double fy = oracle.loss(y);
        check_finite(fy, "loss");
        Eigen::VectorXd gy = oracle.grad(y).cwiseProduct(mask);

        Eigen::VectorXd x_new;
        double fx_new;
        grad_step(y, fy, gy, x_new, fx_new);

        if (fx_new > fx) {
            grad_step(x, fx, gx, x_new, fx_new);
            t = 1.0;
            y = x_new;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = x_new + ((t - 1.0) / t_next) * (x_new - x);
            t = t_next;
        }
        x = x_new;
        fx = fx_new;
        res.trace.push_back(fx);
    }
    res.beta = x;
    res.converged = false;
    return res;
}

}  // namespace dcrr
