#pragma once

// Small dense log-barrier minimiser over a box with optional linear
// inequality constraints. Inner steps are damped Newton with finite-difference
// derivatives of the objective and analytic derivatives of the barrier.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace idc::optim {

struct LinearConstraint {
    std::vector<double> a;  // a . x + b >= 0
    double b = 0.0;
};

struct BarrierProblem {
    std::size_t dim = 0;
    std::function<double(std::span<const double>)> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LinearConstraint> constraints;
};

struct BarrierOptions {
    std::size_t max_iters = 10000;
    double objective_tol = 1e-12;
    double mu0 = 1e-3;
    double mu_min = 1e-16;
    double mu_factor = 0.1;
    double fd_step = 1e-6;
};

struct BarrierResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

// Slack of the tightest constraint at x (box included); > 0 means strictly feasible.
double min_slack(const BarrierProblem& problem, std::span<const double> x);

// Requires a strictly feasible start.
BarrierResult barrier_minimize(const BarrierProblem& problem, std::span<const double> x0,
                               const BarrierOptions& options = {});

}  // namespace idc::optim
