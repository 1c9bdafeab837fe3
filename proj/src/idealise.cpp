#include "idc/idealise.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "idc/error.hpp"
#include "idc/wavelet_matrix.hpp"

namespace idc::idealise {

std::size_t dyadic_scale_count(std::size_t n) {
    std::size_t count = 0;
    for (std::size_t m = 1; m <= n; m <<= 1) ++count;
    return count;
}

double interval_level(double alpha, std::size_t m, std::size_t n) {
    return alpha / static_cast<double>(dyadic_scale_count(n)) / static_cast<double>((n + m - 1) / m);
}

double binomial_half_cdf_below(std::size_t m, std::size_t q) {
    const double dm = static_cast<double>(m);
    const double log_norm = std::lgamma(dm + 1.0) - dm * std::log(2.0);
    double acc = 0.0;
    for (std::size_t x = 0; x < q && x <= m; ++x) {
        const double dx = static_cast<double>(x);
        acc += std::exp(log_norm - std::lgamma(dx + 1.0) - std::lgamma(dm - dx + 1.0));
    }
    return std::min(acc, 1.0);
}

SignBounds sign_bounds(double alpha, std::size_t m, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
    if (m < 1 || m > n) throw Error(ErrorCode::InvalidParam, "interval length must satisfy 1 <= m <= n");
    SignBounds b;
    b.alpha = alpha;
    b.m = m;
    b.interval_level = interval_level(alpha, m, n);
    const double tail = b.interval_level / 2.0;

    const double dm = static_cast<double>(m);
    const double log_norm = std::lgamma(dm + 1.0) - dm * std::log(2.0);
    std::size_t q = 0;
    double cdf = 0.0;  // P(X < q)
    while (q + 1 <= m / 2) {
        const double dq = static_cast<double>(q);
        const double next = cdf + std::exp(log_norm - std::lgamma(dq + 1.0) - std::lgamma(dm - dq + 1.0));
        if (next > tail) break;
        cdf = next;
        ++q;
    }
    b.lower = q;
    b.upper = m - q;
    return b;
}

namespace {

struct Scale {
    std::size_t m;
    std::size_t lower;
    std::vector<double> lo_val;  // indexed by interval end e (exclusive)
    std::vector<double> hi_val;
};

std::vector<Scale> active_scales(const WaveletMatrix& wm, double alpha) {
    const std::size_t n = wm.size();
    std::vector<Scale> scales;
    for (std::size_t m = 1; m <= n; m <<= 1) {
        const auto b = sign_bounds(alpha, m, n);
        if (b.lower == 0) continue;
        Scale s{m, b.lower, std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1, 0.0)};
        for (std::size_t e = m; e <= n; ++e) {
            // Level must sit in [y_(lower), y_(upper+1)] (1-based order stats).
            s.lo_val[e] = wm.kth(e - m, e, b.lower - 1);
            s.hi_val[e] = wm.kth(e - m, e, m - b.lower);
        }
        scales.push_back(std::move(s));
    }
    return scales;
}

// Sliding-window extrema over interval ends e' in [start, e] for each scale,
// where start = tested_from + m moves monotonically.
class FeasibilityWindow {
public:
    explicit FeasibilityWindow(const std::vector<Scale>& scales) : scales_(scales), lo_(scales.size()), hi_(scales.size()) {}

    void push(std::size_t e) {
        for (std::size_t p = 0; p < scales_.size(); ++p) {
            const auto& sc = scales_[p];
            if (e < sc.m) continue;
            auto& lo = lo_[p];
            while (!lo.empty() && sc.lo_val[lo.back()] <= sc.lo_val[e]) lo.pop_back();
            lo.push_back(e);
            auto& hi = hi_[p];
            while (!hi.empty() && sc.hi_val[hi.back()] >= sc.hi_val[e]) hi.pop_back();
            hi.push_back(e);
        }
    }

    void evict_before(std::size_t tested_from) {
        for (std::size_t p = 0; p < scales_.size(); ++p) {
            const std::size_t start = tested_from + scales_[p].m;
            while (!lo_[p].empty() && lo_[p].front() < start) lo_[p].pop_front();
            while (!hi_[p].empty() && hi_[p].front() < start) hi_[p].pop_front();
        }
    }

    bool feasible() const {
        double max_lo = -std::numeric_limits<double>::infinity();
        double min_hi = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < scales_.size(); ++p) {
            if (!lo_[p].empty()) max_lo = std::max(max_lo, scales_[p].lo_val[lo_[p].front()]);
            if (!hi_[p].empty()) min_hi = std::min(min_hi, scales_[p].hi_val[hi_[p].front()]);
        }
        return max_lo <= min_hi;
    }

private:
    const std::vector<Scale>& scales_;
    std::vector<std::deque<std::size_t>> lo_;
    std::vector<std::deque<std::size_t>> hi_;
};

// Exact feasible level interval of a tested stretch [a, e).
std::pair<double, double> level_interval(const std::vector<Scale>& scales, std::size_t a, std::size_t e) {
    double max_lo = -std::numeric_limits<double>::infinity();
    double min_hi = std::numeric_limits<double>::infinity();
    for (const auto& sc : scales) {
        for (std::size_t end = a + sc.m; end <= e; ++end) {
            max_lo = std::max(max_lo, sc.lo_val[end]);
            min_hi = std::min(min_hi, sc.hi_val[end]);
        }
    }
    return {max_lo, min_hi};
}

double median(const WaveletMatrix& wm, std::size_t a, std::size_t e) {
    const std::size_t m = e - a;
    const double lo = wm.kth(a, e, (m - 1) / 2);
    const double hi = wm.kth(a, e, m / 2);
    return 0.5 * (lo + hi);
}

// Sum of |y - median| over [a, e).
double l1_cost(const WaveletMatrix& wm, std::size_t a, std::size_t e) {
    if (a >= e) return 0.0;
    const std::size_t m = e - a;
    const std::size_t k = (m - 1) / 2;
    const auto [v, below] = wm.kth_with_sum(a, e, k);
    const double total = wm.range_sum(a, e);
    const double above = total - below - v;
    return (static_cast<double>(k) * v - below) + (above - static_cast<double>(m - k - 1) * v);
}

}  // namespace

Idealisation muscle_fit(std::span<const double> y, double sample_rate, std::size_t w, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
    if (y.empty()) throw Error(ErrorCode::EmptyTrace, "recording has no samples");
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    for (double v : y) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParam, "recording contains non-finite samples");
    }
    const std::size_t n = y.size();
    const WaveletMatrix wm(y);
    const auto scales = active_scales(wm, alpha);

    auto tested_from = [w](std::size_t s) { return s == 0 ? std::size_t{0} : s + w; };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(n + 1, inf);
    std::vector<std::size_t> prev(n + 1, 0);
    cost[0] = 0.0;

    // Endpoints reachable with exactly k segments form the contiguous block
    // [block_begin, block_end]; feasible starts for a given end form a suffix
    // of that block, tracked by `first`.
    std::size_t block_begin = 0, block_end = 0;
    while (block_end < n) {
        FeasibilityWindow window(scales);
        std::size_t first = block_begin;
        // Tested windows may end inside the current block as well.
        for (std::size_t pre = tested_from(first) + 1; pre <= block_end; ++pre) window.push(pre);
        std::size_t e = block_end + 1;
        for (; e <= n; ++e) {
            window.push(e);
            window.evict_before(tested_from(first));
            while (first <= block_end && tested_from(first) < e && !window.feasible()) {
                ++first;
                window.evict_before(tested_from(first));
            }
            if (first > block_end) break;

            double best = inf;
            std::size_t arg = first;
            for (std::size_t s = first; s <= block_end; ++s) {
                const std::size_t a = tested_from(s);
                const double c = cost[s] + (a < e ? l1_cost(wm, a, e) : 0.0);
                if (c < best) {
                    best = c;
                    arg = s;
                }
            }
            cost[e] = best;
            prev[e] = arg;
        }
        block_begin = block_end + 1;
        block_end = e - 1;
    }

    std::vector<std::size_t> bounds{n};
    while (bounds.back() != 0) bounds.push_back(prev[bounds.back()]);
    std::reverse(bounds.begin(), bounds.end());

    Idealisation out;
    out.alpha = alpha;
    out.transient_samples = w;
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
        Segment seg;
        seg.start = bounds[j];
        seg.end = bounds[j + 1];
        seg.tested_from = std::min(tested_from(seg.start), seg.end);
        if (seg.tested_from < seg.end) {
            const auto [lo, hi] = level_interval(scales, seg.tested_from, seg.end);
            seg.level = std::clamp(median(wm, seg.tested_from, seg.end), lo, hi);
        } else {
            seg.level = median(wm, seg.start, seg.end);
        }
        out.segments.push_back(seg);
    }

    // Neighbouring segments that landed on the same level are merged when the
    // merged stretch still passes.
    std::vector<Segment> merged;
    for (const auto& seg : out.segments) {
        if (!merged.empty() && merged.back().level == seg.level &&
            segment_satisfies_bounds(y, merged.back().tested_from, seg.end, seg.level, alpha)) {
            merged.back().end = seg.end;
            continue;
        }
        merged.push_back(seg);
    }
    out.segments = std::move(merged);

    out.fit.breakpoints.clear();
    for (const auto& seg : out.segments) {
        out.fit.breakpoints.push_back(static_cast<double>(seg.start) / sample_rate);
        out.fit.levels.push_back(seg.level);
    }
    out.fit.breakpoints.push_back(static_cast<double>(n) / sample_rate);
    out.n_switches = out.segments.size() - 1;
    out.feasible = true;
    return out;
}

Idealisation muscle_fit(const Recording& recording, double alpha) {
    return muscle_fit(recording.samples, recording.sample_rate, recording.kernel.transient_samples(), alpha);
}

bool segment_satisfies_bounds(std::span<const double> y, std::size_t a, std::size_t e, double level, double alpha) {
    const std::size_t n = y.size();
    if (a >= e) return true;
    std::vector<std::size_t> below(e - a + 1, 0), at_or_below(e - a + 1, 0);
    for (std::size_t k = a; k < e; ++k) {
        below[k - a + 1] = below[k - a] + (y[k] < level);
        at_or_below[k - a + 1] = at_or_below[k - a] + (y[k] <= level);
    }
    for (std::size_t m = 1; m <= n; m <<= 1) {
        const auto b = sign_bounds(alpha, m, n);
        if (b.lower == 0) continue;
        for (std::size_t i = 0; i + m <= e - a; ++i) {
            if (below[i + m] - below[i] > b.upper) return false;
            if (at_or_below[i + m] - at_or_below[i] < b.lower) return false;
        }
    }
    return true;
}

std::vector<double> expand(const Idealisation& ideal, std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (const auto& seg : ideal.segments) {
        for (std::size_t k = seg.start; k < std::min(seg.end, n); ++k) out[k] = seg.level;
    }
    return out;
}

double empirical_fdr(std::size_t true_K, std::span<const std::size_t> est_K) {
    if (est_K.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t k : est_K) {
        const double over = k > true_K ? static_cast<double>(k - true_K) : 0.0;
        acc += over / static_cast<double>(std::max<std::size_t>(k, 1));
    }
    return acc / static_cast<double>(est_K.size());
}

}  // namespace idc::idealise
