#pragma once

// Core value types shared by every stage of the pipeline.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace idc {

// VND-MC parameters. lambda[r] is the probability that a closed channel stays
// closed when r channels are open (r = 0..L-1); eta[r-1] is the probability
// that an open channel stays open when r channels are open (r = 1..L).
struct ParamVector {
    std::vector<double> lambda;
    std::vector<double> eta;

    int L() const { return static_cast<int>(lambda.size()); }

    // r in [0, L-1]
    double lam(int r) const { return lambda[static_cast<std::size_t>(r)]; }
    // r in [1, L]
    double eta_at(int r) const { return eta[static_cast<std::size_t>(r - 1)]; }

    // (lambda_0..lambda_{L-1}, eta_1..eta_L)
    std::vector<double> flat() const;
    static ParamVector from_flat(std::span<const double> values);
    static ParamVector constant(int L, double lambda, double eta);
};

// (L+1)x(L+1) transition matrix of the sum process. Empirical matrices carry
// per-row visit counts; rows with zero visits are masked.
struct TransitionMatrix {
    int dim = 0;
    std::vector<double> entries;  // row-major
    std::optional<std::vector<std::uint64_t>> row_counts;

    TransitionMatrix() = default;
    explicit TransitionMatrix(int d) : dim(d), entries(static_cast<std::size_t>(d) * d, 0.0) {}

    double& at(int i, int j) { return entries[static_cast<std::size_t>(i) * dim + j]; }
    double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * dim + j]; }

    bool row_defined(int i) const { return !row_counts || (*row_counts)[static_cast<std::size_t>(i)] > 0; }
    int L() const { return dim - 1; }
};

// Piecewise constant function on [0, t_max): levels[j] holds on
// [breakpoints[j], breakpoints[j+1]). breakpoints has K+2 entries.
struct StepFunction {
    std::vector<double> breakpoints;
    std::vector<double> levels;

    std::size_t K() const { return levels.empty() ? 0 : levels.size() - 1; }
    double t_max() const { return breakpoints.empty() ? 0.0 : breakpoints.back(); }
    double value_at(double t) const;
};

enum class KernelKind { Identity, BSpline2, BesselFIR, Custom };

struct Kernel {
    KernelKind kind = KernelKind::Identity;
    std::vector<double> taps{1.0};
    int bessel_order = 0;
    double bessel_cutoff_hz = 0.0;

    // Samples after a switch during which the filtered signal is transitional.
    std::size_t transient_samples() const { return taps.empty() ? 0 : taps.size() - 1; }
    double support_seconds(double sample_rate) const {
        return static_cast<double>(transient_samples()) / sample_rate;
    }
    bool symmetric(double tol = 1e-12) const;
};

// Arithmetic ladder of conductance levels: rung i sits at offset + i * spacing.
struct LevelLadder {
    int L = 1;
    double offset = 0.0;
    double spacing = 1.0;
    double sse = 0.0;

    double rung(int i) const { return offset + spacing * i; }
};

struct DiscreteTrace {
    std::vector<int> values;
    LevelLadder ladder;
    double sample_rate = 1.0;
};

struct Recording {
    std::vector<double> samples;
    double sample_rate = 1.0;
    Kernel kernel;
    // Present for simulated data.
    std::optional<StepFunction> truth_step;
    std::optional<DiscreteTrace> truth_trace;
    std::optional<ParamVector> truth_theta;
};

}  // namespace idc
