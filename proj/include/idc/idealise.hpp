#pragma once

// Multiscale quantile segmentation of a Recording: the fit has the fewest
// switches such that, on every constant stretch (minus the filter transient
// after each switch), the number of samples below the level is compatible
// with a fair sign process on every dyadic-length sub-interval.

#include <cstddef>
#include <span>
#include <vector>

#include "idc/types.hpp"

namespace idc::idealise {

struct SignBounds {
    double alpha = 0.1;
    std::size_t m = 1;
    std::size_t lower = 0;
    std::size_t upper = 1;
    double interval_level = 0.0;  // two-sided level spent on one interval
};

// Number of dyadic lengths 1, 2, 4, ... not exceeding n.
std::size_t dyadic_scale_count(std::size_t n);

// Two-sided level for one interval of length m in a record of n samples:
// alpha split evenly over dyadic scales, then over the ceil(n / m) disjoint
// windows of that length.
double interval_level(double alpha, std::size_t m, std::size_t n);

// lower = largest q with P(Bin(m, 1/2) < q) <= interval_level / 2 (capped at
// m / 2), upper = m - lower.
SignBounds sign_bounds(double alpha, std::size_t m, std::size_t n);

// P(Bin(m, 1/2) < q), summed in log space.
double binomial_half_cdf_below(std::size_t m, std::size_t q);

struct Segment {
    std::size_t start = 0;   // sample index of the switch
    std::size_t end = 0;     // one past the last sample
    std::size_t tested_from = 0;
    double level = 0.0;
};

struct Idealisation {
    StepFunction fit;
    std::vector<Segment> segments;
    double alpha = 0.1;
    std::size_t n_switches = 0;
    bool feasible = true;
    std::size_t transient_samples = 0;
};

inline constexpr double kDefaultAlpha = 0.1;

Idealisation muscle_fit(const Recording& recording, double alpha = kDefaultAlpha);
Idealisation muscle_fit(std::span<const double> samples, double sample_rate, std::size_t transient_samples,
                        double alpha = kDefaultAlpha);

// Independent check of the sign-count constraints of one segment at a level;
// ties count on either side.
bool segment_satisfies_bounds(std::span<const double> samples, std::size_t tested_from, std::size_t end,
                              double level, double alpha);

// Per-sample level of the fit.
std::vector<double> expand(const Idealisation& ideal, std::size_t n);

// Mean over runs of max(K_hat - K, 0) / max(K_hat, 1).
double empirical_fdr(std::size_t true_K, std::span<const std::size_t> est_K);

}  // namespace idc::idealise
