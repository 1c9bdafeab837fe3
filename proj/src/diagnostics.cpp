#include "idc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/special_functions/gamma.hpp>

#include "idc/error.hpp"

namespace idc::diagnostics {

std::size_t default_bin_count(std::size_t n) {
    const auto b = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    return std::clamp<std::size_t>(b, 1, 50);
}

Histogram make_histogram(std::span<const double> values, std::span<const double> weights, std::size_t bins) {
    if (bins == 0) throw Error(ErrorCode::InvalidParam, "histogram needs at least one bin");
    if (!weights.empty() && weights.size() != values.size()) {
        throw Error(ErrorCode::DimMismatch, "weights and values differ in length");
    }
    Histogram h;
    if (values.empty()) {
        h.edges = {0.0, 1.0};
        h.counts = {0.0};
        return h;
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
        bins = 1;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
    h.edges.back() = hi;
    h.counts.assign(bins, 0.0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        auto b = static_cast<std::size_t>((values[k] - lo) / width);
        b = std::min(b, bins - 1);
        h.counts[b] += weights.empty() ? 1.0 : weights[k];
    }
    return h;
}

Histogram make_histogram(std::span<const double> values, std::size_t bins) { return make_histogram(values, {}, bins); }

namespace {

double total(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

void chi_square_merged(const std::vector<std::vector<double>>& input, double& statistic, int& dof) {
    // Drop empty rows and columns.
    std::vector<std::vector<double>> t;
    for (const auto& row : input) {
        if (total(row) > 0.0) t.push_back(row);
    }
    statistic = 0.0;
    dof = 0;
    if (t.empty()) return;
    std::size_t C = t.front().size();
    for (std::size_t j = C; j-- > 0;) {
        double cs = 0.0;
        for (const auto& row : t) cs += row[j];
        if (cs == 0.0) {
            for (auto& row : t) row.erase(row.begin() + static_cast<std::ptrdiff_t>(j));
        }
    }
    C = t.front().size();

    for (;;) {
        const std::size_t R = t.size();
        C = t.front().size();
        if (R < 2 || C < 2) return;
        std::vector<double> rs(R, 0.0), cs(C, 0.0);
        double N = 0.0;
        for (std::size_t i = 0; i < R; ++i) {
            for (std::size_t j = 0; j < C; ++j) {
                rs[i] += t[i][j];
                cs[j] += t[i][j];
                N += t[i][j];
            }
        }
        const auto rmin = static_cast<std::size_t>(std::min_element(rs.begin(), rs.end()) - rs.begin());
        const auto cmin = static_cast<std::size_t>(std::min_element(cs.begin(), cs.end()) - cs.begin());
        if (rs[rmin] * cs[cmin] / N >= kMinExpected) {
            for (std::size_t i = 0; i < R; ++i) {
                for (std::size_t j = 0; j < C; ++j) {
                    const double e = rs[i] * cs[j] / N;
                    statistic += (t[i][j] - e) * (t[i][j] - e) / e;
                }
            }
            dof = static_cast<int>((R - 1) * (C - 1));
            return;
        }
        // Merge the sparsest margin into the next sparsest one of the same kind.
        if (rs[rmin] <= cs[cmin]) {
            std::size_t into = rmin == 0 ? 1 : 0;
            for (std::size_t i = 0; i < R; ++i) {
                if (i != rmin && rs[i] < rs[into]) into = i;
            }
            for (std::size_t j = 0; j < C; ++j) t[into][j] += t[rmin][j];
            t.erase(t.begin() + static_cast<std::ptrdiff_t>(rmin));
        } else {
            std::size_t into = cmin == 0 ? 1 : 0;
            for (std::size_t j = 0; j < C; ++j) {
                if (j != cmin && cs[j] < cs[into]) into = j;
            }
            for (auto& row : t) {
                row[into] += row[cmin];
                row.erase(row.begin() + static_cast<std::ptrdiff_t>(cmin));
            }
        }
    }
}

MarkovTestResult markov_property_test(std::span<const int> values) {
    if (values.size() < 3) throw Error(ErrorCode::TooShort, "Markov test needs at least three samples");
    std::map<int, std::map<std::pair<int, int>, std::uint64_t>> triples;
    for (std::size_t k = 1; k + 1 < values.size(); ++k) {
        ++triples[values[k]][{values[k - 1], values[k + 1]}];
    }
    MarkovTestResult res;
    for (const auto& [cur, cells] : triples) {
        ContingencyTable ct;
        ct.current = cur;
        for (const auto& [pn, c] : cells) {
            ct.previous_states.push_back(pn.first);
            ct.next_states.push_back(pn.second);
        }
        auto uniq = [](std::vector<int>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        uniq(ct.previous_states);
        uniq(ct.next_states);
        ct.counts.assign(ct.previous_states.size(), std::vector<std::uint64_t>(ct.next_states.size(), 0));
        std::vector<std::vector<double>> table(ct.previous_states.size(), std::vector<double>(ct.next_states.size(), 0.0));
        for (const auto& [pn, c] : cells) {
            const auto i = static_cast<std::size_t>(
                std::lower_bound(ct.previous_states.begin(), ct.previous_states.end(), pn.first) - ct.previous_states.begin());
            const auto j = static_cast<std::size_t>(
                std::lower_bound(ct.next_states.begin(), ct.next_states.end(), pn.second) - ct.next_states.begin());
            ct.counts[i][j] = c;
            table[i][j] = static_cast<double>(c);
        }
        chi_square_merged(table, ct.statistic, ct.dof);
        ct.used = ct.dof > 0;
        if (ct.used) {
            res.statistic += ct.statistic;
            res.dof += ct.dof;
        }
        res.contingency.push_back(std::move(ct));
    }
    if (res.dof == 0) throw Error(ErrorCode::AllCellsSparse, "no contingency table has enough counts");
    res.p_value = std::clamp(boost::math::gamma_q(res.dof / 2.0, res.statistic / 2.0), 0.0, 1.0);
    return res;
}

MarkovTestResult markov_property_test(const DiscreteTrace& trace) { return markov_property_test(trace.values); }

DwellFit dwell_times(std::span<const int> values, int state, double sample_rate) {
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    DwellFit fit;
    fit.state = state;
    const std::size_t n = values.size();
    std::size_t k = 0;
    while (k < n) {
        std::size_t e = k;
        while (e < n && values[e] == values[k]) ++e;
        if (values[k] == state && k > 0 && e < n) {
            fit.samples.push_back(static_cast<double>(e - k) / sample_rate);
        }
        k = e;
    }
    if (fit.samples.empty()) throw Error(ErrorCode::NoVisits, "state has no interior dwell");
    double mean = 0.0;
    for (double s : fit.samples) mean += s;
    mean /= static_cast<double>(fit.samples.size());
    fit.rate = 1.0 / mean;
    fit.histogram = make_histogram(fit.samples, default_bin_count(fit.samples.size()));
    return fit;
}

DwellFit dwell_times(const DiscreteTrace& trace, int state, double sample_rate) {
    if (state < 0 || state > trace.ladder.L) throw Error(ErrorCode::OutOfRange, "state outside {0..L}");
    return dwell_times(trace.values, state, sample_rate);
}

}  // namespace idc::diagnostics
