#pragma once

// Named simulation scenarios and the Monte-Carlo studies built on them.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "idc/pipeline.hpp"
#include "idc/signal_synth.hpp"
#include "idc/types.hpp"
#include "idc/vnd_model.hpp"

namespace idc::studies {

enum class Cooperativity { Zero, Positive, Negative };
const char* to_string(Cooperativity c);
vnd::Verdict expected_verdict(Cooperativity c);

// Two channels: lambda_0, lambda_1, eta_1, eta_2.
ParamVector two_channel_theta(Cooperativity c);
// Twenty channels, used to study a misspecified channel count.
ParamVector twenty_channel_theta(Cooperativity c);

// Gaussian sd 0.1, Cauchy scale 0.05, 0.85 / 0.15 mixture of the two.
std::vector<synth::NoiseSpec> standard_noises();
std::string noise_label(const synth::NoiseSpec& n);

// Default synthesis: 10 kHz, 4-pole Bessel at 1 kHz, offset 0, spacing 1.
synth::SynthesisConfig default_synthesis(std::size_t n);

// Runs fn(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t cell, std::uint64_t rep);

struct ErrorRep {
    std::string noise;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    double l2_error = 0.0;
    vnd::Verdict verdict = vnd::Verdict::Indeterminate;
    int L = 0;
    bool failed = false;
    std::string failure;
};

struct ErrorStudy {
    Cooperativity scenario = Cooperativity::Zero;
    std::vector<ErrorRep> reps;  // noise-major, then repetition
};

struct ErrorStudyConfig {
    Cooperativity scenario = Cooperativity::Zero;
    std::size_t repetitions = 100;
    std::size_t n = 1200;
    synth::SynthesisConfig synthesis = default_synthesis(1200);
    pipeline::Options pipeline;  // L defaults to the true 2 (see make_error_config)
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

ErrorStudyConfig make_error_config(Cooperativity c);
ErrorStudy run_error_study(const ErrorStudyConfig& cfg);

struct ManyChannelRep {
    Cooperativity scenario = Cooperativity::Zero;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    int distinct_states = 0;
    int L_hat = 0;
    bool fitted = false;
    vnd::CooperativityReport report;
    bool failed = false;
    std::string failure;
};

struct ManyChannelConfig {
    std::vector<Cooperativity> scenarios{Cooperativity::Zero, Cooperativity::Positive, Cooperativity::Negative};
    std::size_t repetitions = 300;
    std::size_t n = 100000;
    int max_L = 20;
    double gap_factor = 3.0;
    bool fit = true;
    infer::MdeOptions mde;
    double tolerance = vnd::kDefaultTolerance;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

// The sum process is observed directly (no measurement noise): with twenty
// channels switching several times per sample window no idealiser can
// resolve single events, so the study isolates the channel-count and
// ratio behaviour of the estimator.
std::vector<ManyChannelRep> run_many_channel_study(const ManyChannelConfig& cfg);

struct FdrRep {
    double alpha = 0.1;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::size_t K_hat = 0;
};

struct FdrConfig {
    std::vector<double> alphas{0.05, 0.1};
    std::size_t repetitions = 500;
    std::size_t n = 2000;
    double sigma = 0.1;
    synth::KernelSpec kernel = default_synthesis(2000).kernel;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

std::vector<FdrRep> run_fdr_study(const FdrConfig& cfg);

}  // namespace idc::studies
