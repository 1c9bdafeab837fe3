#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "idc/discretise.hpp"
#include "idc/error.hpp"
#include "idc/idealise.hpp"
#include "idc/vnd_model.hpp"

using namespace idc;
using discretise::WeightedLevel;

namespace {

std::vector<WeightedLevel> unit(const std::vector<double>& xs) {
    std::vector<WeightedLevel> out;
    for (double x : xs) out.push_back({x, 1.0});
    return out;
}

double sse_for(const std::vector<WeightedLevel>& lv, double offset, double spacing, int L) {
    double s = 0.0;
    for (const auto& w : lv) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= L; ++i) best = std::min(best, std::pow(w.level - (offset + spacing * i), 2));
        s += w.weight * best;
    }
    return s;
}

// Exact minimum: the optimal assignment is monotone in the level, so it is
// enough to fit every nondecreasing labelling by weighted least squares.
double labelling_oracle(std::vector<WeightedLevel> lv, int L) {
    std::sort(lv.begin(), lv.end(), [](auto& a, auto& b) { return a.level < b.level; });
    std::vector<int> lab(lv.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, int)> rec = [&](std::size_t k, int lo) {
        if (k == lv.size()) {
            double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < lv.size(); ++i) {
                const double w = lv[i].weight, x = lab[i], y = lv[i].level;
                sw += w, sx += w * x, sy += w * y, sxx += w * x * x, sxy += w * x * y;
            }
            const double det = sw * sxx - sx * sx;
            if (det <= 1e-12 * sw * sw) return;
            const double spacing = (sw * sxy - sx * sy) / det;
            if (!(spacing > 0.0)) return;
            const double offset = (sy - spacing * sx) / sw;
            double s = 0.0;
            for (std::size_t i = 0; i < lv.size(); ++i) s += lv[i].weight * std::pow(lv[i].level - offset - spacing * lab[i], 2);
            best = std::min(best, s);
            return;
        }
        for (int v = lo; v <= L; ++v) {
            lab[k] = v;
            rec(k + 1, v);
        }
    };
    rec(0, 0);
    return best;
}

double dense_grid_oracle(const std::vector<WeightedLevel>& lv, int L) {
    double lo = lv[0].level, hi = lv[0].level;
    for (const auto& w : lv) lo = std::min(lo, w.level), hi = std::max(hi, w.level);
    const double range = hi - lo;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 400; ++a) {
        const double offset = lo - range / 2.0 + range * a / 400.0;
        for (int b = 1; b <= 400; ++b) {
            const double spacing = 2.0 * range * b / 400.0;
            best = std::min(best, sse_for(lv, offset, spacing, L));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("select_L on well separated levels") {
    CHECK(discretise::select_L(unit({0.0, 1.0, 2.0, 3.0})) == 3);
    CHECK(discretise::select_L(unit({0.0, 0.02, 1.0, 1.03}), 20, 3.0) == 1);
    CHECK(discretise::select_L(unit({0.0, 0.02, 1.0, 1.03, 2.01}), 20, 3.0) == 2);
}

TEST_CASE("select_L clamps") {
    CHECK(discretise::select_L(unit({4.2})) == 1);
    CHECK(discretise::select_L(unit({0, 1, 2, 3, 4, 5}), 3) == 3);
    CHECK_THROWS_AS(discretise::select_L(std::vector<WeightedLevel>{}), Error);
    CHECK_THROWS_AS(discretise::select_L(unit({0, 1}), 20, 1.0), Error);
}

TEST_CASE("group_levels uses distinct sorted levels") {
    const auto g = discretise::group_levels(unit({2.0, 0.0, 2.0, 0.05, 1.0}));
    CHECK(g.sorted_levels == std::vector<double>{0.0, 0.05, 1.0, 2.0});
    CHECK(g.group_of == std::vector<std::size_t>{0, 0, 1, 2});
    CHECK(g.n_groups == 3);
}

TEST_CASE("exact ladder is recovered") {
    const auto ladder = discretise::equal_spacing_cluster(unit({0.0, 1.0, 2.0}), 2);
    CHECK(std::abs(ladder.offset) < 1e-12);
    CHECK(std::abs(ladder.spacing - 1.0) < 1e-12);
    CHECK(ladder.sse < 1e-20);
    CHECK(ladder.L == 2);
}

TEST_CASE("three levels match the oracles") {
    const auto lv = unit({0.1, 0.9, 2.1});
    const auto ladder = discretise::equal_spacing_cluster(lv, 2);
    CHECK(std::abs(ladder.sse - labelling_oracle(lv, 2)) < 1e-6);
    CHECK(ladder.sse <= dense_grid_oracle(lv, 2) + 1e-12);
    CHECK(std::abs(discretise::ladder_sse(lv, ladder) - ladder.sse) < 1e-12);
}

TEST_CASE("random weighted instances match the labelling oracle") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        const int L = 1 + rep % 4;
        const std::size_t k = 2 + static_cast<std::size_t>(rep % 6);
        std::vector<WeightedLevel> lv;
        for (std::size_t i = 0; i < k; ++i) lv.push_back({3.0 * u(gen), 0.1 + u(gen)});
        const auto ladder = discretise::equal_spacing_cluster(lv, L);
        const double oracle = labelling_oracle(lv, L);
        CHECK(std::abs(ladder.sse - oracle) < 1e-6);
    }
}

TEST_CASE("assignment is optimal for the returned ladder") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> g(0.0, 0.08);
    for (int rep = 0; rep < 40; ++rep) {
        const int L = 2 + rep % 5;
        std::vector<WeightedLevel> lv;
        for (int i = 0; i <= L; ++i) {
            for (int j = 0; j < 3; ++j) lv.push_back({0.4 + 1.3 * i + g(gen), 1.0 + j});
        }
        const auto ladder = discretise::equal_spacing_cluster(lv, L);
        CHECK(ladder.spacing > 0.0);
        for (const auto& w : lv) {
            const int r = discretise::nearest_rung(ladder, w.level);
            for (int i = 0; i <= L; ++i) {
                CHECK(std::abs(w.level - ladder.rung(r)) <= std::abs(w.level - ladder.rung(i)) + 1e-15);
            }
        }
        CHECK(std::abs(ladder.sse - sse_for(lv, ladder.offset, ladder.spacing, L)) < 1e-9);
    }
}

TEST_CASE("affine equivariance") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        const int L = 1 + rep % 3;
        std::vector<WeightedLevel> lv;
        for (int i = 0; i < 5; ++i) lv.push_back({2.0 * u(gen), 0.5 + u(gen)});
        const double a = 0.5 + 3.0 * u(gen), b = 4.0 * u(gen) - 2.0;
        auto mapped = lv;
        for (auto& w : mapped) w.level = a * w.level + b;
        const auto l1 = discretise::equal_spacing_cluster(lv, L);
        const auto l2 = discretise::equal_spacing_cluster(mapped, L);
        CHECK(std::abs(l2.sse - a * a * l1.sse) < 1e-9);
        CHECK(std::abs(l2.offset - (a * l1.offset + b)) < 1e-6);
        CHECK(std::abs(l2.spacing - a * l1.spacing) < 1e-6);
        for (std::size_t i = 0; i < lv.size(); ++i) {
            CHECK(discretise::nearest_rung(l1, lv[i].level) == discretise::nearest_rung(l2, mapped[i].level));
        }
    }
}

TEST_CASE("rung zero sits at the lowest occupied group") {
    // Only rungs 2 and 3 of a four-channel ladder are populated.
    const auto ladder = discretise::equal_spacing_cluster(unit({5.0, 6.0}), 4);
    CHECK(std::abs(ladder.offset - 5.0) < 1e-9);
    CHECK(discretise::baseline_mismatch(ladder));
    CHECK_FALSE(discretise::baseline_mismatch(ladder, 5.2));
}

TEST_CASE("cluster input errors") {
    CHECK_THROWS_AS(discretise::equal_spacing_cluster(unit({1.0, 1.0}), 2), Error);
    CHECK_THROWS_AS(discretise::equal_spacing_cluster(std::vector<WeightedLevel>{}, 2), Error);
    CHECK_THROWS_AS(discretise::equal_spacing_cluster(std::vector<WeightedLevel>{{0, 1}, {1, 0}}, 1), Error);
}

TEST_CASE("nearest rung ties go to fewer open channels") {
    LevelLadder ladder{3, 0.0, 1.0, 0.0};
    CHECK(discretise::nearest_rung(ladder, 0.5) == 0);
    CHECK(discretise::nearest_rung(ladder, 1.5) == 1);
    CHECK(discretise::nearest_rung(ladder, 1.5000001) == 2);
    CHECK(discretise::nearest_rung(ladder, -4.0) == 0);
    CHECK(discretise::nearest_rung(ladder, 99.0) == 3);
    CHECK(discretise::nearest_rung(ladder, 2.0) == 2);
}

TEST_CASE("discretise_trace expands segments per sample") {
    idealise::Idealisation ideal;
    ideal.segments = {{0, 3, 0, 0.0}, {3, 5, 3, 1.02}, {5, 9, 5, 0.01}};
    LevelLadder ladder{1, 0.0, 1.0, 0.0};
    const auto tr = discretise::discretise_trace(ideal, ladder, 100.0, 9);
    CHECK(tr.values == std::vector<int>{0, 0, 0, 1, 1, 0, 0, 0, 0});
    CHECK(tr.sample_rate == 100.0);
    CHECK(tr.ladder.L == 1);
}

TEST_CASE("levels are weighted by dwell duration") {
    idealise::Idealisation ideal;
    ideal.segments = {{0, 30, 0, 0.0}, {30, 40, 30, 1.0}, {40, 100, 40, 0.0}};
    const auto lv = discretise::levels_from_idealisation(ideal, 1000.0);
    REQUIRE(lv.size() == 2);
    CHECK(lv[0].level == 0.0);
    CHECK(lv[0].weight == doctest::Approx(0.09));
    CHECK(lv[1].weight == doctest::Approx(0.01));
}

TEST_CASE("noiseless end-to-end recovery of the sum process") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int L = 3;
        const auto tr = vnd::simulate_vnd(ParamVector::constant(L, 0.97, 0.96), 3000, seed);
        const double offset = -0.7, spacing = 1.7;
        // Exact idealisation: one segment per run of the true trace.
        idealise::Idealisation ideal;
        for (std::size_t k = 0; k < tr.sum.size(); ++k) {
            const double level = offset + spacing * tr.sum[k];
            if (k == 0 || tr.sum[k] != tr.sum[k - 1]) ideal.segments.push_back({k, k + 1, k, level});
            else ideal.segments.back().end = k + 1;
        }
        const auto levels = discretise::levels_from_idealisation(ideal, 1000.0);
        const int top = *std::max_element(tr.sum.begin(), tr.sum.end());
        REQUIRE(*std::min_element(tr.sum.begin(), tr.sum.end()) == 0);
        const int L_hat = discretise::select_L(levels);
        CHECK(L_hat == top);
        const auto ladder = discretise::equal_spacing_cluster(levels, L_hat);
        CHECK(std::abs(ladder.offset - offset) < 1e-9);
        CHECK(std::abs(ladder.spacing - spacing) < 1e-9);
        const auto dt = discretise::discretise_trace(ideal, ladder, 1000.0, tr.sum.size());
        CHECK(dt.values == tr.sum);
    }
}
