#pragma once

// Static wavelet matrix over a sequence of doubles, answering range order
// statistics in O(log n): k-th smallest value in [l, r), and the sum of the k
// smallest. Values are replaced by their stable ranks so all keys are
// distinct.

#include <cstdint>
#include <span>
#include <vector>

namespace idc {

class WaveletMatrix {
public:
    WaveletMatrix() = default;
    explicit WaveletMatrix(std::span<const double> values);

    std::size_t size() const { return n_; }

    // 0-based k-th smallest of values[l..r), k < r - l.
    double kth(std::size_t l, std::size_t r, std::size_t k) const;

    struct KthWithSum {
        double value;
        double sum_below;  // sum of the k smallest values (excluding the k-th)
    };
    KthWithSum kth_with_sum(std::size_t l, std::size_t r, std::size_t k) const;

    // Sum of values[l..r).
    double range_sum(std::size_t l, std::size_t r) const { return prefix_[r] - prefix_[l]; }

private:
    std::size_t n_ = 0;
    int levels_ = 0;
    std::vector<double> sorted_;  // value of each rank
    std::vector<double> prefix_;  // prefix sums of the original sequence
    // Per level: number of zero bits among the first i positions, the count
    // of zeros on the level, and prefix sums of values routed left.
    std::vector<std::vector<std::uint32_t>> zeros_before_;
    std::vector<std::uint32_t> zero_count_;
    std::vector<std::vector<double>> zero_value_prefix_;
};

}  // namespace idc
