#pragma once

// Measurement model: a sum-process trace becomes a piecewise constant
// conductance, is passed through a causal FIR low-pass kernel and corrupted
// by (optionally filtered) noise.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idc/types.hpp"
#include "idc/vnd_model.hpp"

namespace idc::synth {

StepFunction step_from_trace(std::span<const int> trace, double offset, double spacing, double sample_rate);

struct KernelSpec {
    KernelKind kind = KernelKind::Identity;
    int bessel_order = 4;
    double bessel_cutoff_hz = 1000.0;
    std::vector<double> custom_taps;
};

// Truncation rule for the Bessel impulse response: keep taps until the
// cumulative mass reaches 1 - kBesselTailMass, then renormalise.
inline constexpr double kBesselTailMass = 1e-6;

Kernel make_kernel(const KernelSpec& spec, double sample_rate);

// (rho * f)(t_k) for t_k = k / sample_rate, k = 0..n-1. Sample k integrates f
// over the cell [k, k+1) / sample_rate; samples before t = 0 take the first
// level.
std::vector<double> convolve_sample(const StepFunction& f, const Kernel& kernel, double sample_rate, std::size_t n);

// Causal FIR with left extension of the first input value.
std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps);

enum class NoiseKind { Gaussian, Cauchy, Mixture };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    double sigma = 0.1;             // Gaussian and mixture
    double scale = 0.05;            // Cauchy and mixture
    double weight_gaussian = 0.85;  // mixture
    bool filtered = false;

    static NoiseSpec gaussian(double sigma) { return {NoiseKind::Gaussian, sigma, 0.05, 1.0, false}; }
    static NoiseSpec cauchy(double scale) { return {NoiseKind::Cauchy, 0.1, scale, 0.0, false}; }
    static NoiseSpec mixture(double w, double sigma, double scale) {
        return {NoiseKind::Mixture, sigma, scale, w, false};
    }
};

void validate(const NoiseSpec& noise);
std::string describe(const NoiseSpec& noise);

// Raw iid noise draws (before any filtering).
std::vector<double> draw_noise(const NoiseSpec& noise, std::size_t n, std::uint64_t seed);

struct SynthesisConfig {
    std::size_t n = 1200;
    double sample_rate = 10000.0;
    double offset = 0.0;
    double spacing = 1.0;
    KernelSpec kernel;
    NoiseSpec noise;
    vnd::InitialState init = vnd::InitialState::all_closed();
};

struct SynthesisResult {
    Recording recording;
    vnd::JointTrace joint;
    // Filtered noise requested on an asymmetric custom kernel is turned off.
    bool noise_filter_disabled = false;
};

SynthesisResult synthesize_recording(const ParamVector& theta, const SynthesisConfig& config, std::uint64_t seed);

// Recording built from a given sum trace (no VND simulation).
Recording synthesize_from_trace(std::span<const int> trace, int L, const SynthesisConfig& config,
                                std::uint64_t seed, bool* noise_filter_disabled = nullptr);

const char* to_string(KernelKind kind);
const char* to_string(NoiseKind kind);

}  // namespace idc::synth
