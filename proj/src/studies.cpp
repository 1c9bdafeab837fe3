#include "idc/studies.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "idc/discretise.hpp"
#include "idc/error.hpp"
#include "idc/idealise.hpp"
#include "idc/infer.hpp"
#include "idc/rng.hpp"

namespace idc::studies {

const char* to_string(Cooperativity c) {
    switch (c) {
        case Cooperativity::Zero: return "zero";
        case Cooperativity::Positive: return "positive";
        case Cooperativity::Negative: return "negative";
    }
    return "zero";
}

vnd::Verdict expected_verdict(Cooperativity c) {
    switch (c) {
        case Cooperativity::Zero: return vnd::Verdict::Zero;
        case Cooperativity::Positive: return vnd::Verdict::Positive;
        case Cooperativity::Negative: return vnd::Verdict::Negative;
    }
    return vnd::Verdict::Zero;
}

ParamVector two_channel_theta(Cooperativity c) {
    switch (c) {
        case Cooperativity::Zero: return ParamVector::from_flat(std::vector{0.99, 0.99, 0.99, 0.99});
        case Cooperativity::Positive: return ParamVector::from_flat(std::vector{0.99, 0.985, 0.985, 0.99});
        case Cooperativity::Negative: return ParamVector::from_flat(std::vector{0.985, 0.99, 0.99, 0.985});
    }
    return {};
}

ParamVector twenty_channel_theta(Cooperativity c) {
    const int L = 20;
    ParamVector t = ParamVector::constant(L, 0.99, 0.99);
    if (c == Cooperativity::Positive) {
        t = ParamVector::constant(L, 0.98, 0.98);
        t.lambda.front() = 0.99;
        t.eta.back() = 0.99;
    } else if (c == Cooperativity::Negative) {
        t = ParamVector::constant(L, 0.99, 0.98);
        t.lambda.front() = 0.98;
        t.eta.front() = 0.99;
    }
    return t;
}

std::vector<synth::NoiseSpec> standard_noises() {
    return {synth::NoiseSpec::gaussian(0.1), synth::NoiseSpec::cauchy(0.05), synth::NoiseSpec::mixture(0.85, 0.1, 0.05)};
}

std::string noise_label(const synth::NoiseSpec& n) { return synth::to_string(n.kind); }

synth::SynthesisConfig default_synthesis(std::size_t n) {
    synth::SynthesisConfig c;
    c.n = n;
    c.sample_rate = 10000.0;
    c.kernel.kind = KernelKind::BesselFIR;
    c.kernel.bessel_order = 4;
    c.kernel.bessel_cutoff_hz = 1000.0;
    return c;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, count); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t cell, std::uint64_t rep) {
    return rng::derive_seed(rng::derive_seed(seed, cell), rep);
}

ErrorStudyConfig make_error_config(Cooperativity c) {
    ErrorStudyConfig cfg;
    cfg.scenario = c;
    cfg.pipeline.L = 2;
    return cfg;
}

ErrorStudy run_error_study(const ErrorStudyConfig& cfg) {
    const auto noises = standard_noises();
    const auto theta = two_channel_theta(cfg.scenario);
    ErrorStudy study;
    study.scenario = cfg.scenario;
    study.reps.resize(noises.size() * cfg.repetitions);
    parallel_for(study.reps.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t cell = idx / cfg.repetitions;
        const std::size_t rep = idx % cfg.repetitions;
        auto& out = study.reps[idx];
        out.noise = noise_label(noises[cell]);
        out.rep = rep;
        out.seed = rep_seed(cfg.seed, cell, rep);
        auto syn = cfg.synthesis;
        syn.n = cfg.n;
        syn.noise = noises[cell];
        try {
            const auto sim = synth::synthesize_recording(theta, syn, out.seed);
            const auto res = pipeline::run(sim.recording, cfg.pipeline);
            out.L = res.L;
            out.verdict = res.report.verdict;
            out.l2_error = res.L == theta.L() ? infer::l2_distance(res.fit.theta_hat, theta)
                                              : std::numeric_limits<double>::quiet_NaN();
        } catch (const Error& e) {
            out.failed = true;
            out.failure = e.what();
            out.l2_error = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return study;
}

std::vector<ManyChannelRep> run_many_channel_study(const ManyChannelConfig& cfg) {
    std::vector<ManyChannelRep> reps(cfg.scenarios.size() * cfg.repetitions);
    parallel_for(reps.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t cell = idx / cfg.repetitions;
        auto& out = reps[idx];
        out.scenario = cfg.scenarios[cell];
        out.rep = idx % cfg.repetitions;
        out.seed = rep_seed(cfg.seed, static_cast<std::uint64_t>(out.scenario), out.rep);
        try {
            const auto theta = twenty_channel_theta(out.scenario);
            const auto joint = vnd::simulate_vnd(theta, cfg.n, out.seed);

            std::vector<std::size_t> occupancy(static_cast<std::size_t>(theta.L()) + 1, 0);
            for (int s : joint.sum) ++occupancy[static_cast<std::size_t>(s)];
            std::vector<discretise::WeightedLevel> levels;
            for (std::size_t s = 0; s < occupancy.size(); ++s) {
                if (occupancy[s] > 0) levels.push_back({static_cast<double>(s), static_cast<double>(occupancy[s])});
            }
            out.distinct_states = static_cast<int>(levels.size());
            out.L_hat = discretise::select_L(levels, cfg.max_L, cfg.gap_factor);
            if (!cfg.fit) return;

            const auto ladder = discretise::equal_spacing_cluster(levels, out.L_hat);
            std::vector<double> per_sample(joint.sum.begin(), joint.sum.end());
            const auto trace = discretise::discretise_levels(per_sample, ladder, 1.0);
            const auto q_hat = infer::empirical_transition_matrix(trace);
            const auto fit = infer::mde_fit(q_hat, out.L_hat, cfg.mde);
            out.report = infer::cooperativity_report(fit.theta_hat, cfg.tolerance);
            out.fitted = true;
        } catch (const Error& e) {
            out.failed = true;
            out.failure = e.what();
        }
    });
    return reps;
}

std::vector<FdrRep> run_fdr_study(const FdrConfig& cfg) {
    std::vector<FdrRep> reps(cfg.alphas.size() * cfg.repetitions);
    parallel_for(reps.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t cell = idx / cfg.repetitions;
        auto& out = reps[idx];
        out.alpha = cfg.alphas[cell];
        out.rep = idx % cfg.repetitions;
        // The same recordings are reused across alpha levels.
        out.seed = rep_seed(cfg.seed, 0, out.rep);
        auto syn = default_synthesis(cfg.n);
        syn.kernel = cfg.kernel;
        syn.noise = synth::NoiseSpec::gaussian(cfg.sigma);
        const std::vector<int> constant(cfg.n, 0);
        const auto rec = synth::synthesize_from_trace(constant, 1, syn, out.seed);
        out.K_hat = idealise::muscle_fit(rec, out.alpha).n_switches;
    });
    return reps;
}

}  // namespace idc::studies
