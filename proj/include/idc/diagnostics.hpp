#pragma once

// Model-adequacy checks on a discretised trace.

#include <cstddef>
#include <span>
#include <vector>

#include "idc/types.hpp"

namespace idc::diagnostics {

struct Histogram {
    std::vector<double> edges;   // bins + 1 entries
    std::vector<double> counts;  // weighted counts per bin
};

// Equal-width bins over [min, max]; a degenerate range gets one unit-width bin.
Histogram make_histogram(std::span<const double> values, std::size_t bins);
Histogram make_histogram(std::span<const double> values, std::span<const double> weights, std::size_t bins);
// ceil(sqrt(n)) clamped to [1, 50].
std::size_t default_bin_count(std::size_t n);

struct ContingencyTable {
    int current = 0;
    std::vector<int> previous_states;
    std::vector<int> next_states;
    std::vector<std::vector<std::uint64_t>> counts;  // raw counts [prev][next]
    double statistic = 0.0;  // after merging
    int dof = 0;
    bool used = false;
};

struct MarkovTestResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
    std::vector<ContingencyTable> contingency;
};

inline constexpr double kMinExpected = 5.0;

// Second-order chi-square test: given the current state, are predecessor
// and successor independent? Sparse rows/columns are merged until every
// expected count is at least kMinExpected.
MarkovTestResult markov_property_test(const DiscreteTrace& trace);
MarkovTestResult markov_property_test(std::span<const int> values);

// Chi-square statistic and dof of one table after merging; dof 0 means unusable.
void chi_square_merged(const std::vector<std::vector<double>>& table, double& statistic, int& dof);

struct DwellFit {
    int state = 0;
    std::vector<double> samples;  // seconds
    double rate = 0.0;            // 1 / mean
    Histogram histogram;
};

DwellFit dwell_times(const DiscreteTrace& trace, int state, double sample_rate);
DwellFit dwell_times(std::span<const int> values, int state, double sample_rate);

}  // namespace idc::diagnostics
