#include "idc/discretise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "idc/error.hpp"

namespace idc::discretise {

std::vector<WeightedLevel> levels_from_idealisation(const idealise::Idealisation& ideal, double sample_rate) {
    std::map<double, double> acc;
    for (const auto& seg : ideal.segments) {
        acc[seg.level] += static_cast<double>(seg.end - seg.start) / sample_rate;
    }
    std::vector<WeightedLevel> out;
    out.reserve(acc.size());
    for (const auto& [level, weight] : acc) out.push_back({level, weight});
    return out;
}

GroupSplit group_levels(std::span<const WeightedLevel> levels, double gap_factor) {
    if (levels.empty()) throw Error(ErrorCode::Empty, "no levels to group");
    if (!(gap_factor > 1.0)) throw Error(ErrorCode::InvalidParam, "gap_factor must exceed 1");
    GroupSplit g;
    for (const auto& wl : levels) g.sorted_levels.push_back(wl.level);
    std::sort(g.sorted_levels.begin(), g.sorted_levels.end());
    g.sorted_levels.erase(std::unique(g.sorted_levels.begin(), g.sorted_levels.end()), g.sorted_levels.end());

    const std::size_t u = g.sorted_levels.size();
    std::vector<double> gaps;
    for (std::size_t i = 1; i < u; ++i) gaps.push_back(g.sorted_levels[i] - g.sorted_levels[i - 1]);

    double threshold = 0.0;
    if (!gaps.empty()) threshold = *std::max_element(gaps.begin(), gaps.end()) / gap_factor;

    g.group_of.assign(u, 0);
    std::size_t group = 0;
    for (std::size_t i = 1; i < u; ++i) {
        if (gaps[i - 1] > threshold) ++group;
        g.group_of[i] = group;
    }
    g.n_groups = group + 1;
    return g;
}

int select_L(std::span<const WeightedLevel> levels, int max_L, double gap_factor) {
    if (max_L < 1) throw Error(ErrorCode::InvalidParam, "max_L must be >= 1");
    const auto g = group_levels(levels, gap_factor);
    const int L = static_cast<int>(g.n_groups) - 1;
    return std::clamp(L, 1, max_L);
}

int nearest_rung(const LevelLadder& ladder, double x) {
    const double pos = (x - ladder.offset) / ladder.spacing;
    const double r = std::ceil(pos - 0.5);
    if (!(r > 0.0)) return 0;
    if (r >= static_cast<double>(ladder.L)) return ladder.L;
    return static_cast<int>(r);
}

bool fit_ladder(std::span<const WeightedLevel> levels, std::span<const int> labels, double& offset, double& spacing) {
    double sw = 0, si = 0, sx = 0, sii = 0, six = 0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const double w = levels[k].weight;
        const double i = labels[k];
        sw += w;
        si += w * i;
        sx += w * levels[k].level;
        sii += w * i * i;
        six += w * i * levels[k].level;
    }
    const double ibar = si / sw;
    const double xbar = sx / sw;
    const double var_i = sii / sw - ibar * ibar;
    if (!(var_i > 1e-12)) return false;
    const double cov = six / sw - ibar * xbar;
    const double d = cov / var_i;
    if (!(d > 0.0)) return false;
    spacing = d;
    offset = xbar - d * ibar;
    return true;
}

double ladder_sse(std::span<const WeightedLevel> levels, const LevelLadder& ladder) {
    double sse = 0.0;
    for (const auto& wl : levels) {
        const double r = wl.level - ladder.rung(nearest_rung(ladder, wl.level));
        sse += wl.weight * r * r;
    }
    return sse;
}

namespace {

struct Candidate {
    double sse;
    double spacing;
    double offset;
};

bool better(const Candidate& a, const Candidate& b) {
    const double tol = 1e-12 * std::max(1.0, std::abs(b.sse));
    if (a.sse < b.sse - tol) return true;
    if (a.sse > b.sse + tol) return false;
    if (a.spacing != b.spacing) return a.spacing > b.spacing;
    return a.offset < b.offset;
}

// Alternate nearest-rung labelling and least squares until labels settle.
Candidate refine(std::span<const WeightedLevel> levels, int L, double offset, double spacing) {
    LevelLadder ladder{L, offset, spacing, 0.0};
    std::vector<int> labels(levels.size(), -1);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (std::size_t k = 0; k < levels.size(); ++k) {
            const int r = nearest_rung(ladder, levels[k].level);
            changed |= r != labels[k];
            labels[k] = r;
        }
        if (!changed) break;
        double o = ladder.offset, d = ladder.spacing;
        if (!fit_ladder(levels, labels, o, d)) break;
        ladder.offset = o;
        ladder.spacing = d;
    }
    return {ladder_sse(levels, ladder), ladder.spacing, ladder.offset};
}

// Exact search over the cells of the line arrangement in (spacing, offset):
// inside a cell the nearest-rung labels are fixed and the best ladder is the
// least-squares fit for those labels. Every cell is crossed by a vertical
// line at the midpoint between consecutive critical spacings, where two
// rung boundaries of different levels meet.
Candidate arrangement_search(std::span<const WeightedLevel> levels, int L) {
    std::map<double, double> merged;
    for (const auto& wl : levels) merged[wl.level] += wl.weight;
    std::vector<double> x, w;
    for (const auto& [lv, wt] : merged) {
        x.push_back(lv);
        w.push_back(wt);
    }
    const std::size_t k = x.size();

    std::vector<double> critical;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            for (int d = 1; d < L; ++d) critical.push_back((x[a] - x[b]) / d);
        }
    }
    std::sort(critical.begin(), critical.end());
    critical.erase(std::unique(critical.begin(), critical.end()), critical.end());
    std::vector<double> probes;
    if (critical.empty()) {
        probes.push_back(x.back() - x.front());
    } else {
        probes.push_back(critical.front() / 2.0);
        for (std::size_t i = 0; i + 1 < critical.size(); ++i) probes.push_back(0.5 * (critical[i] + critical[i + 1]));
        probes.push_back(critical.back() * 2.0);
    }

    double sw = 0.0, sx = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        sw += w[j];
        sx += w[j] * x[j];
        sxx += w[j] * x[j] * x[j];
    }

    Candidate best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    struct Crossing {
        double offset;
        std::size_t level;
    };
    std::vector<Crossing> crossings;
    for (double delta : probes) {
        // Lowering the offset past x_j - delta * (i + 1/2) moves x_j from rung i to i + 1.
        crossings.clear();
        for (std::size_t j = 0; j < k; ++j) {
            for (int i = 0; i < L; ++i) crossings.push_back({x[j] - delta * (i + 0.5), j});
        }
        std::sort(crossings.begin(), crossings.end(), [](const Crossing& a, const Crossing& b) {
            return a.offset > b.offset;
        });
        double sl = 0.0, sll = 0.0, slx = 0.0;
        std::vector<int> label(k, 0);
        for (std::size_t c = 0; c < crossings.size();) {
            const double at = crossings[c].offset;
            for (; c < crossings.size() && crossings[c].offset == at; ++c) {
                const std::size_t j = crossings[c].level;
                const double l = label[j];
                sl += w[j];
                sll += w[j] * (2.0 * l + 1.0);
                slx += w[j] * x[j];
                ++label[j];
            }
            const double var_l = sll - sl * sl / sw;
            if (!(var_l > 1e-12 * sw)) continue;
            const double cov = slx - sl * sx / sw;
            const double spacing = cov / var_l;
            if (!(spacing > 0.0)) continue;
            const double offset = (sx - spacing * sl) / sw;
            const double sse = std::max(0.0, sxx - sx * sx / sw - cov * cov / var_l);
            const Candidate cand{sse, spacing, offset};
            if (better(cand, best)) best = cand;
        }
    }
    return best;
}

// Number of cell evaluations above which only the restart heuristic runs.
constexpr double kExactBudget = 4e7;

}  // namespace

LevelLadder equal_spacing_cluster(std::span<const WeightedLevel> levels, int L) {
    if (L < 1) throw Error(ErrorCode::InvalidParam, "L must be >= 1");
    if (levels.empty()) throw Error(ErrorCode::DegenerateInput, "no levels");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& wl : levels) {
        if (!std::isfinite(wl.level) || !(wl.weight > 0.0)) {
            throw Error(ErrorCode::DegenerateInput, "levels must be finite with positive weight");
        }
        lo = std::min(lo, wl.level);
        hi = std::max(hi, wl.level);
    }
    if (!(hi > lo)) throw Error(ErrorCode::DegenerateInput, "at least two distinct levels are required");
    const double range = hi - lo;

    Candidate best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    auto consider = [&](double offset, double spacing) {
        const auto c = refine(levels, L, offset, spacing);
        if (better(c, best)) best = c;
    };

    // Ladders whose k steps span the data, with the bottom rung at each
    // admissible position.
    for (int k = 1; k <= L; ++k) {
        const double d = range / k;
        for (int j = 0; j + k <= L; ++j) consider(lo - j * d, d);
    }
    // Geometric sweep of spacings with fractional offsets.
    const int n_spacing = 120;
    const int n_phase = 8;
    for (int s = 0; s < n_spacing; ++s) {
        const double d = range / L * std::pow(16.0, (s - n_spacing / 2.0) / (n_spacing / 2.0));
        for (int ph = 0; ph < n_phase; ++ph) {
            const double base = lo - (static_cast<double>(ph) / n_phase) * d;
            for (int j = 0; j <= L; ++j) {
                const double offset = base - j * d;
                if (offset + L * d < lo) continue;
                consider(offset, d);
            }
        }
    }

    {
        std::vector<double> distinct;
        for (const auto& wl : levels) distinct.push_back(wl.level);
        std::sort(distinct.begin(), distinct.end());
        const auto k = static_cast<double>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
        if (0.5 * k * k * L * k * L <= kExactBudget) {
            const auto exact = arrangement_search(levels, L);
            if (std::isfinite(exact.sse)) consider(exact.offset, exact.spacing);
        }
    }

    LevelLadder ladder{L, best.offset, best.spacing, best.sse};
    // Anchor rung 0 at the lowest occupied rung.
    int min_rung = L;
    for (const auto& wl : levels) min_rung = std::min(min_rung, nearest_rung(ladder, wl.level));
    if (min_rung > 0) {
        ladder.offset += min_rung * ladder.spacing;
        ladder.sse = ladder_sse(levels, ladder);
    }
    return ladder;
}

DiscreteTrace discretise_levels(std::span<const double> per_sample_levels, const LevelLadder& ladder,
                                double sample_rate) {
    if (!(ladder.spacing > 0.0) || ladder.L < 1) throw Error(ErrorCode::InvalidParam, "invalid ladder");
    DiscreteTrace out;
    out.ladder = ladder;
    out.sample_rate = sample_rate;
    out.values.reserve(per_sample_levels.size());
    for (double x : per_sample_levels) out.values.push_back(nearest_rung(ladder, x));
    return out;
}

DiscreteTrace discretise_trace(const idealise::Idealisation& ideal, const LevelLadder& ladder, double sample_rate,
                               std::size_t n) {
    const auto per_sample = idealise::expand(ideal, n);
    return discretise_levels(per_sample, ladder, sample_rate);
}

bool baseline_mismatch(const LevelLadder& ladder, double baseline) {
    return std::abs(ladder.offset - baseline) > ladder.spacing / 2.0;
}

}  // namespace idc::discretise
