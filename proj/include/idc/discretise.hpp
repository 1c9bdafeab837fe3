#pragma once

// Mapping idealised conductance levels onto an equally spaced ladder of
// open-channel counts, and choosing the channel count.

#include <cstddef>
#include <span>
#include <vector>

#include "idc/idealise.hpp"
#include "idc/types.hpp"

namespace idc::discretise {

struct WeightedLevel {
    double level = 0.0;
    double weight = 1.0;
};

inline constexpr double kDefaultGapFactor = 3.0;
inline constexpr int kDefaultMaxL = 20;

// Distinct idealised levels weighted by total dwell duration in seconds.
std::vector<WeightedLevel> levels_from_idealisation(const idealise::Idealisation& ideal, double sample_rate);

struct GroupSplit {
    std::vector<double> sorted_levels;        // distinct, ascending
    std::vector<std::size_t> group_of;        // per sorted level
    std::size_t n_groups = 0;
};

// Gap splitting: a gap between neighbouring distinct levels separates groups
// when it exceeds max_gap / gap_factor.
GroupSplit group_levels(std::span<const WeightedLevel> levels, double gap_factor = kDefaultGapFactor);

// number of groups - 1, clamped to [1, max_L].
int select_L(std::span<const WeightedLevel> levels, int max_L = kDefaultMaxL, double gap_factor = kDefaultGapFactor);

// Nearest rung, ties to the lower rung, clamped to [0, L].
int nearest_rung(const LevelLadder& ladder, double x);

// Weighted least-squares fit of (offset, spacing) for fixed rung labels.
// Returns false when the labels carry no spacing information or the fitted
// spacing is not positive.
bool fit_ladder(std::span<const WeightedLevel> levels, std::span<const int> labels, double& offset, double& spacing);

double ladder_sse(std::span<const WeightedLevel> levels, const LevelLadder& ladder);

LevelLadder equal_spacing_cluster(std::span<const WeightedLevel> levels, int L);

DiscreteTrace discretise_trace(const idealise::Idealisation& ideal, const LevelLadder& ladder, double sample_rate,
                               std::size_t n);
DiscreteTrace discretise_levels(std::span<const double> per_sample_levels, const LevelLadder& ladder,
                                double sample_rate);

// True when rung 0 sits further than spacing / 2 from the zero-current baseline.
bool baseline_mismatch(const LevelLadder& ladder, double baseline = 0.0);

}  // namespace idc::discretise
