#include "idc/wavelet_matrix.hpp"

#include <algorithm>
#include <numeric>

namespace idc {

WaveletMatrix::WaveletMatrix(std::span<const double> values) : n_(values.size()) {
    std::vector<std::uint32_t> order(n_);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
    std::vector<std::uint32_t> rank(n_);
    sorted_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        rank[order[i]] = static_cast<std::uint32_t>(i);
        sorted_[i] = values[order[i]];
    }
    prefix_.assign(n_ + 1, 0.0);
    for (std::size_t i = 0; i < n_; ++i) prefix_[i + 1] = prefix_[i] + values[i];

    levels_ = 1;
    while ((std::size_t{1} << levels_) < n_) ++levels_;

    zeros_before_.assign(static_cast<std::size_t>(levels_), {});
    zero_count_.assign(static_cast<std::size_t>(levels_), 0);
    zero_value_prefix_.assign(static_cast<std::size_t>(levels_), {});

    std::vector<std::uint32_t> cur = rank, next(n_);
    for (int lv = 0; lv < levels_; ++lv) {
        const int bit = levels_ - 1 - lv;
        auto& zb = zeros_before_[lv];
        auto& zv = zero_value_prefix_[lv];
        zb.assign(n_ + 1, 0);
        zv.assign(n_ + 1, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const bool one = (cur[i] >> bit) & 1u;
            zb[i + 1] = zb[i] + (one ? 0 : 1);
            zv[i + 1] = zv[i] + (one ? 0.0 : sorted_[cur[i]]);
        }
        zero_count_[lv] = zb[n_];
        std::size_t zi = 0, oi = zero_count_[lv];
        for (std::size_t i = 0; i < n_; ++i) {
            if ((cur[i] >> bit) & 1u) {
                next[oi++] = cur[i];
            } else {
                next[zi++] = cur[i];
            }
        }
        cur.swap(next);
    }
}

WaveletMatrix::KthWithSum WaveletMatrix::kth_with_sum(std::size_t l, std::size_t r, std::size_t k) const {
    std::uint32_t result = 0;
    double below = 0.0;
    for (int lv = 0; lv < levels_; ++lv) {
        const auto& zb = zeros_before_[lv];
        const std::size_t zl = zb[l], zr = zb[r];
        const std::size_t zeros = zr - zl;
        const int bit = levels_ - 1 - lv;
        if (k < zeros) {
            l = zl;
            r = zr;
        } else {
            below += zero_value_prefix_[lv][r] - zero_value_prefix_[lv][l];
            k -= zeros;
            result |= (1u << bit);
            l = zero_count_[lv] + (l - zl);
            r = zero_count_[lv] + (r - zr);
        }
    }
    return {sorted_[result], below};
}

double WaveletMatrix::kth(std::size_t l, std::size_t r, std::size_t k) const {
    return kth_with_sum(l, r, k).value;
}

}  // namespace idc
