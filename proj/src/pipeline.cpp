#include "idc/pipeline.hpp"

#include "idc/error.hpp"

namespace idc::pipeline {

void fit_trace(const Options& o, Result& out) {
    out.q_hat = infer::empirical_transition_matrix(out.trace);
    auto mde = o.mde;
    out.fit = infer::mde_fit(out.q_hat, out.L, mde);
    out.report = infer::cooperativity_report(out.fit.theta_hat, o.tolerance);
    out.reached = Stage::Fitted;
}

void run_from_idealisation(const Recording& rec, const Options& o, Result& out) {
    out.levels = discretise::levels_from_idealisation(out.ideal, rec.sample_rate);
    if (o.L) {
        out.L = *o.L;
        out.L_selected = false;
    } else {
        out.L = discretise::select_L(out.levels, o.max_L, o.gap_factor);
        out.L_selected = true;
    }
    out.ladder = discretise::equal_spacing_cluster(out.levels, out.L);
    out.baseline_mismatch = discretise::baseline_mismatch(out.ladder, o.baseline);
    out.trace = discretise::discretise_trace(out.ideal, out.ladder, rec.sample_rate, rec.samples.size());
    out.reached = Stage::Discretised;
    fit_trace(o, out);
}

void run(const Recording& rec, const Options& o, Result& out) {
    out = Result{};
    out.ideal = idealise::muscle_fit(rec, o.alpha);
    out.reached = Stage::Idealised;
    run_from_idealisation(rec, o, out);
    score(rec, out);
}

Result run(const Recording& rec, const Options& o) {
    Result r;
    run(rec, o, r);
    return r;
}

void score(const Recording& rec, Result& out) {
    if (!rec.truth_trace || out.reached == Stage::None) return;
    const auto& truth = *rec.truth_trace;
    const std::size_t n = std::min(truth.values.size(), rec.samples.size());
    const auto fitted = idealise::expand(out.ideal, n);
    double sse = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = fitted[k] - truth.ladder.rung(truth.values[k]);
        sse += d * d;
    }
    out.accuracy.level_sse = sse;
    if (out.reached >= Stage::Discretised) {
        std::size_t miss = 0;
        for (std::size_t k = 0; k < n; ++k) miss += out.trace.values[k] != truth.values[k];
        out.accuracy.mismatch_rate = n ? static_cast<double>(miss) / static_cast<double>(n) : 0.0;
    }
    if (out.reached == Stage::Fitted && rec.truth_theta && rec.truth_theta->L() == out.L) {
        out.accuracy.theta_l2 = infer::l2_distance(out.fit.theta_hat, *rec.truth_theta);
    }
}

}  // namespace idc::pipeline
