#pragma once

// Minimum distance estimation of VND-MC parameters from a discretised trace.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "idc/types.hpp"
#include "idc/vnd_model.hpp"

namespace idc::infer {

enum class Branch { Auto, Plus, Minus };
const char* to_string(Branch b);

struct MdeOptions {
    std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t max_iters = 10000;
    double objective_tol = 1e-12;
    double mu0 = 1e-3;
    double mu_min = 1e-16;
    double mu_factor = 0.1;
    Branch branch = Branch::Auto;
    // Starts taken from the coarse grid, and again from lattice minima.
    std::size_t starts_per_row = 3;
};

void validate(const MdeOptions& options);

TransitionMatrix empirical_transition_matrix(const DiscreteTrace& trace);
TransitionMatrix empirical_transition_matrix(std::span<const int> values, int L);

// Sum of squared differences over rows with visits.
double mde_objective(const ParamVector& theta, const TransitionMatrix& q_hat);

// Contribution of sum state i, which depends on lambda_i (i < L) and eta_i (i > 0) only.
double row_objective(const TransitionMatrix& q_hat, int i, double lambda_i, double eta_i);

// Argmin over the product grid. The objective separates over rows, so the
// search is exact for every L. Ties go to the lexicographically smallest
// point; for even L a point and its mirror image in the middle row tie
// exactly, and the one on the requested branch (Plus under Auto) wins.
ParamVector grid_init(const TransitionMatrix& q_hat, int L, const std::vector<double>& grid,
                      Branch branch = Branch::Auto);

struct BranchDiagnostics {
    Branch branch = Branch::Plus;
    ParamVector theta;
    double objective = 0.0;
    bool converged = true;
};

struct MdeDiagnostics {
    ParamVector theta_init;
    double init_objective = 0.0;
    std::vector<BranchDiagnostics> branches;  // even L only
    Branch chosen_branch = Branch::Auto;       // Auto when L is odd
    std::vector<int> masked_rows;
    bool degenerate = false;
    bool converged = true;
    std::size_t iterations = 0;
};

struct MdeResult {
    ParamVector theta_hat;
    double objective = 0.0;
    MdeDiagnostics diagnostics;
};

MdeResult mde_fit(const TransitionMatrix& q_hat, int L, const MdeOptions& options = {});

vnd::CooperativityReport cooperativity_report(const ParamVector& theta_hat, double tol = vnd::kDefaultTolerance);

double l2_distance(const ParamVector& a, const ParamVector& b);
double linf_distance(const ParamVector& a, const ParamVector& b);

}  // namespace idc::infer
