#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/binomial.hpp>

#include "idc/error.hpp"
#include "idc/idealise.hpp"
#include "idc/signal_synth.hpp"

using namespace idc;
using idealise::muscle_fit;

namespace {

std::size_t oracle_lower(double alpha, std::size_t m, std::size_t n) {
    std::size_t scales = 0;
    for (std::size_t s = 1; s <= n; s *= 2) ++scales;
    const double windows = std::ceil(static_cast<double>(n) / static_cast<double>(m));
    const double half = alpha / static_cast<double>(scales) / windows / 2.0;
    boost::math::binomial_distribution<double> bin(static_cast<double>(m), 0.5);
    std::size_t best = 0;
    for (std::size_t q = 1; q <= m / 2; ++q) {
        // P(X < q) = P(X <= q - 1)
        if (boost::math::cdf(bin, static_cast<double>(q - 1)) <= half) best = q;
    }
    return best;
}

// A stretch can carry one constant level iff some sample value in it does:
// the feasible levels form an interval whose end points are order statistics.
bool stretch_feasible(const std::vector<double>& y, std::size_t a, std::size_t e, double alpha) {
    if (a >= e) return true;
    for (std::size_t k = a; k < e; ++k) {
        if (idealise::segment_satisfies_bounds(y, a, e, y[k], alpha)) return true;
    }
    return false;
}

double median_l1(const std::vector<double>& y, std::size_t a, std::size_t e) {
    if (a >= e) return 0.0;
    std::vector<double> v(y.begin() + static_cast<std::ptrdiff_t>(a), y.begin() + static_cast<std::ptrdiff_t>(e));
    std::sort(v.begin(), v.end());
    const double med = 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
    double c = 0.0;
    for (double x : v) c += std::abs(x - med);
    return c;
}

struct Oracle {
    std::size_t segments;
    double cost;
};

// Quadratic DP over segment ends with an independent feasibility check.
Oracle naive_min_segments(const std::vector<double>& y, std::size_t w, double alpha) {
    const std::size_t n = y.size();
    const auto from = [w](std::size_t s) { return s == 0 ? std::size_t{0} : s + w; };
    const std::size_t big = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> seg(n + 1, big);
    std::vector<double> cost(n + 1, 0.0);
    seg[0] = 0;
    for (std::size_t e = 1; e <= n; ++e) {
        for (std::size_t s = 0; s < e; ++s) {
            if (seg[s] == big) continue;
            const std::size_t a = std::min(from(s), e);
            if (!stretch_feasible(y, a, e, alpha)) continue;
            const std::size_t k = seg[s] + 1;
            const double c = cost[s] + median_l1(y, a, e);
            if (k < seg[e] || (k == seg[e] && c < cost[e])) {
                seg[e] = k;
                cost[e] = c;
            }
        }
    }
    return {seg[n], cost[n]};
}

// Exhaustive enumeration of all 2^(n-1) segmentations.
std::size_t brute_min_segments(const std::vector<double>& y, std::size_t w, double alpha) {
    const std::size_t n = y.size();
    std::size_t best = n + 1;
    for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
        std::size_t start = 0, count = 0;
        bool ok = true;
        for (std::size_t k = 1; k <= n && ok; ++k) {
            if (k == n || (mask >> (k - 1) & 1u)) {
                const std::size_t a = std::min(start == 0 ? 0 : start + w, k);
                ok = stretch_feasible(y, a, k, alpha);
                ++count;
                start = k;
            }
        }
        if (ok) best = std::min(best, count);
    }
    return best;
}

std::vector<double> noisy_steps(std::size_t n, const std::vector<std::size_t>& jumps, double sigma, bool cauchy,
                                std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::cauchy_distribution<double> c(0.0, sigma);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        double level = 0.0;
        for (std::size_t j : jumps) level += k >= j ? 1.0 : 0.0;
        y[k] = level + (cauchy ? c(gen) : g(gen));
    }
    return y;
}

double segment_cost(const std::vector<double>& y, const idealise::Idealisation& ideal) {
    double c = 0.0;
    for (const auto& s : ideal.segments) c += median_l1(y, s.tested_from, s.end);
    return c;
}

}  // namespace

TEST_CASE("sign bounds: single samples are unconstrained") {
    for (double alpha : {0.01, 0.1, 0.5, 0.99}) {
        const auto b = idealise::sign_bounds(alpha, 1, 1000);
        CHECK(b.lower == 0);
        CHECK(b.upper == 1);
    }
}

TEST_CASE("sign bounds agree with a binomial CDF oracle") {
    const auto b = idealise::sign_bounds(0.1, 100, 10000);
    CHECK(b.lower == oracle_lower(0.1, 100, 10000));
    CHECK(b.upper == 100 - b.lower);
    for (std::size_t n : {10u, 100u, 1200u, 10000u}) {
        for (std::size_t m = 1; m <= n; m = m * 3 + 1) {
            for (double alpha : {0.05, 0.1, 0.3}) CHECK(idealise::sign_bounds(alpha, m, n).lower == oracle_lower(alpha, m, n));
        }
    }
}

TEST_CASE("sign bounds: ordering and monotonicity in m") {
    for (std::size_t n : {50u, 1000u, 100000u}) {
        std::size_t prev_lower = 0;
        for (std::size_t m = 1; m <= n; ++m) {
            const auto b = idealise::sign_bounds(0.1, m, n);
            CHECK(2 * b.lower <= m);
            CHECK(m <= 2 * b.upper);
            CHECK(b.upper <= m);
            CHECK(b.lower >= prev_lower);
            prev_lower = b.lower;
            if (m > 4096) m += m / 7;
        }
        // Upper bounds grow along the dyadic lengths the fit actually tests.
        std::size_t prev_upper = 0;
        for (std::size_t m = 1; m <= n; m *= 2) {
            const auto b = idealise::sign_bounds(0.1, m, n);
            CHECK(b.upper >= prev_upper);
            prev_upper = b.upper;
        }
    }
}

TEST_CASE("sign bounds errors") {
    CHECK_THROWS_AS(idealise::sign_bounds(0.0, 1, 10), Error);
    CHECK_THROWS_AS(idealise::sign_bounds(1.0, 1, 10), Error);
    CHECK_THROWS_AS(idealise::sign_bounds(0.1, 0, 10), Error);
    CHECK_THROWS_AS(idealise::sign_bounds(0.1, 11, 10), Error);
    try {
        idealise::sign_bounds(1.5, 2, 10);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidAlpha);
    }
}

TEST_CASE("sign count of fair coins stays within bounds at the nominal rate") {
    for (std::size_t n : {200u, 10000u}) {
        const std::size_t m = 100;
        const auto b = idealise::sign_bounds(0.1, m, n);
        boost::math::binomial_distribution<double> bin(static_cast<double>(m), 0.5);
        const double exact_outside = (b.lower > 0 ? boost::math::cdf(bin, static_cast<double>(b.lower - 1)) : 0.0) +
                                     boost::math::cdf(boost::math::complement(bin, static_cast<double>(b.upper)));
        CHECK(exact_outside <= b.interval_level);

        std::mt19937_64 gen(1 + n);
        std::bernoulli_distribution coin(0.5);
        const int reps = 20000;
        int inside = 0;
        for (int r = 0; r < reps; ++r) {
            std::size_t below = 0;
            for (std::size_t k = 0; k < m; ++k) below += coin(gen);
            inside += below >= b.lower && below <= b.upper;
        }
        const double slack = 3.0 * std::sqrt(b.interval_level * (1.0 - b.interval_level) / reps);
        CHECK(static_cast<double>(inside) / reps >= 1.0 - b.interval_level - slack);
    }
}

TEST_CASE("noiseless constant input gives no switches") {
    const std::vector<double> y(500, 2.5);
    const auto fit = muscle_fit(y, 1.0, 0);
    CHECK(fit.n_switches == 0);
    CHECK(fit.fit.levels == std::vector<double>{2.5});
    CHECK(fit.fit.K() == 0);
    CHECK(fit.feasible);
}

TEST_CASE("constant truth with Gaussian noise rarely switches") {
    int zero = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        zero += muscle_fit(noisy_steps(2000, {}, 0.1, false, seed), 1.0, 0, 0.1).n_switches == 0;
    }
    CHECK(zero >= 180);
}

TEST_CASE("a unit jump is found near its position") {
    int hit = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto fit = muscle_fit(noisy_steps(2000, {1000}, 0.1, false, 1000 + seed), 1.0, 0, 0.1);
        if (fit.n_switches == 1) {
            const auto pos = static_cast<long>(fit.segments[1].start);
            hit += std::abs(pos - 1000) <= 10;
        }
    }
    CHECK(hit >= 190);
}

TEST_CASE("minimal switch count and cost agree with a quadratic oracle") {
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<int> level(0, 2);
    std::normal_distribution<double> g(0.0, 0.2);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 10 + static_cast<std::size_t>(rep % 31);
        const std::size_t w = static_cast<std::size_t>(rep % 3);
        const double alpha = rep % 2 ? 0.3 : 0.6;
        std::vector<double> y(n);
        double cur = level(gen);
        for (auto& v : y) {
            if (gen() % 6 == 0) cur = level(gen);
            v = cur + g(gen);
        }
        const auto fit = muscle_fit(y, 1.0, w, alpha);
        const auto oracle = naive_min_segments(y, w, alpha);
        CHECK(fit.segments.size() == oracle.segments);
        CHECK(std::abs(segment_cost(y, fit) - oracle.cost) < 1e-9);
    }
}

TEST_CASE("switch count equals exhaustive enumeration on short inputs") {
    std::mt19937_64 gen(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 6 + static_cast<std::size_t>(rep % 9);
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) y[k] = (k >= n / 2 ? 4.0 : 0.0) + g(gen);
        const std::size_t w = static_cast<std::size_t>(rep % 2);
        const double alpha = 0.9;
        CHECK(muscle_fit(y, 1.0, w, alpha).segments.size() == brute_min_segments(y, w, alpha));
    }
}

TEST_CASE("every returned segment passes an independent recheck") {
    synth::KernelSpec spec;
    spec.kind = KernelKind::BesselFIR;
    const auto kernel = synth::make_kernel(spec, 10000.0);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto y = noisy_steps(3000, {500, 900, 2000}, 0.3, seed % 2 == 1, seed);
        y = synth::fir_filter(y, kernel.taps);
        const auto fit = muscle_fit(y, 10000.0, kernel.transient_samples(), 0.1);
        REQUIRE(fit.feasible);
        CHECK(fit.n_switches + 1 == fit.fit.levels.size());
        CHECK(fit.fit.breakpoints.size() == fit.fit.levels.size() + 1);
        for (std::size_t j = 0; j < fit.segments.size(); ++j) {
            const auto& s = fit.segments[j];
            CHECK(s.tested_from == std::min(j == 0 ? 0 : s.start + kernel.transient_samples(), s.end));
            CHECK(idealise::segment_satisfies_bounds(y, s.tested_from, s.end, s.level, 0.1));
            if (j > 0) CHECK(fit.fit.levels[j] != fit.fit.levels[j - 1]);
        }
    }
}

TEST_CASE("filter transients are excluded from the test") {
    Recording rec;
    rec.sample_rate = 10000.0;
    synth::KernelSpec spec;
    spec.kind = KernelKind::Custom;
    spec.custom_taps.assign(64, 1.0);
    rec.kernel = synth::make_kernel(spec, rec.sample_rate);
    std::vector<int> trace(1000, 0);
    std::fill(trace.begin() + 500, trace.end(), 1);
    const auto f = synth::step_from_trace(trace, 0.0, 1.0, rec.sample_rate);
    rec.samples = synth::convolve_sample(f, rec.kernel, rec.sample_rate, trace.size());
    const auto fit = muscle_fit(rec, 0.1);
    CHECK(fit.n_switches == 1);
    CHECK(fit.fit.levels.back() == doctest::Approx(1.0));
    // Without the exclusion the ramp samples need levels of their own.
    CHECK(muscle_fit(rec.samples, rec.sample_rate, 0, 0.1).n_switches > 1);
}

TEST_CASE("smaller alpha never adds switches") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto y = noisy_steps(1500, {300, 310, 900}, 0.4, seed % 3 == 0, seed);
        std::size_t prev = 0;
        for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5}) {
            const auto k = muscle_fit(y, 1.0, 0, alpha).n_switches;
            CHECK(k >= prev);
            prev = k;
        }
    }
}

TEST_CASE("false discovery proportion stays below alpha") {
    for (double alpha : {0.05, 0.1}) {
        for (bool jumps : {false, true}) {
            std::vector<std::size_t> est;
            const std::vector<std::size_t> truth = jumps ? std::vector<std::size_t>{700, 1400} : std::vector<std::size_t>{};
            for (std::uint64_t seed = 0; seed < 300; ++seed) {
                est.push_back(muscle_fit(noisy_steps(2000, truth, 0.1, false, 5000 + seed), 1.0, 0, alpha).n_switches);
            }
            CHECK(idealise::empirical_fdr(truth.size(), est) <= alpha + 0.03);
        }
    }
}

TEST_CASE("Cauchy noise barely changes detection") {
    // Cauchy scale matched to the Gaussian half inter-quartile range.
    const double sigma = 0.25;
    int gauss = 0, cauchy = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        gauss += muscle_fit(noisy_steps(2000, {700, 1400}, sigma, false, seed), 1.0, 0).n_switches == 2;
        cauchy += muscle_fit(noisy_steps(2000, {700, 1400}, sigma * 0.6744897501960817, true, seed), 1.0, 0).n_switches == 2;
    }
    CHECK(std::abs(gauss - cauchy) <= 20);
}

TEST_CASE("empirical_fdr formula") {
    const std::vector<std::size_t> exact{2, 2, 2};
    CHECK(idealise::empirical_fdr(2, exact) == 0.0);
    const std::vector<std::size_t> runs{1, 0, 0, 0};
    CHECK(idealise::empirical_fdr(0, runs) == doctest::Approx(0.25));
    const std::vector<std::size_t> more{4, 1};
    CHECK(idealise::empirical_fdr(2, more) == doctest::Approx(0.25));
}

TEST_CASE("input errors") {
    const std::vector<double> empty;
    CHECK_THROWS_AS(muscle_fit(empty, 1.0, 0), Error);
    const std::vector<double> y{1.0, 2.0};
    CHECK_THROWS_AS(muscle_fit(y, 1.0, 0, 0.0), Error);
    const std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(muscle_fit(bad, 1.0, 0), Error);
}

TEST_CASE("expand returns the per-sample level") {
    const std::vector<double> y{0, 0, 0, 0, 0, 0, 0, 0, 5, 5, 5, 5, 5, 5, 5, 5};
    const auto fit = muscle_fit(y, 1.0, 0, 0.5);
    const auto e = idealise::expand(fit, y.size());
    CHECK(e == y);
}
