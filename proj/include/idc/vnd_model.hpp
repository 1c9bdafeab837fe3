#pragma once

// Vector-norm-dependent Markov chains (VND-MC): parameter validation, the
// closed-form transition matrix of the sum process, a brute-force oracle over
// all 2^L joint states, simulation and cooperativity classification.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "idc/error.hpp"
#include "idc/types.hpp"

namespace idc::vnd {

struct ThetaIssue {
    ErrorCode code;               // OutOfRange or WrongArity
    std::optional<std::size_t> index;  // flat index into (lambda..., eta...)
    std::string message;
};

// nullopt when every invariant of ParamVector holds.
std::optional<ThetaIssue> validate_theta(const ParamVector& theta);
// Throws Error(InvalidTheta) carrying the issue.
void require_valid(const ParamVector& theta);

TransitionMatrix sum_transition_matrix(const ParamVector& theta);

// Enumerates all 2^L successor states of the canonical state "first i
// channels open". Limited to L <= 20.
TransitionMatrix sum_transition_matrix_bruteforce(const ParamVector& theta);

// P(X_{k+1} = to | X_k = from) for joint binary states (bit c = channel c).
double joint_transition_probability(const ParamVector& theta, std::uint32_t from, std::uint32_t to);

struct JointTrace {
    int L = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> states;  // n x L, row-major
    std::vector<int> sum;

    std::uint8_t state(std::size_t k, int c) const { return states[k * static_cast<std::size_t>(L) + c]; }
};

// Either an explicit binary vector or all channels closed.
struct InitialState {
    std::optional<std::vector<std::uint8_t>> explicit_state;

    static InitialState all_closed() { return {}; }
    static InitialState from(std::vector<std::uint8_t> x) { return {std::move(x)}; }
};

// Channel c at step k draws from stream kChannelStreamBase + c, counter k.
JointTrace simulate_vnd(const ParamVector& theta, std::size_t n, std::uint64_t seed,
                        const InitialState& init = InitialState::all_closed());

enum class Verdict { Positive, Negative, Zero, Indeterminate };
const char* to_string(Verdict v);

inline constexpr double kDefaultTolerance = 1e-3;

struct CooperativityReport {
    ParamVector theta_hat;
    std::vector<double> lambda_ratios;     // lambda_0 / lambda_r, r = 1..L-1
    std::vector<double> eta_open_ratios;   // eta_L / eta_r, r = 1..L-1
    std::vector<double> eta_close_ratios;  // eta_{r+1} / eta_1, r = 1..L-1
    Verdict verdict = Verdict::Indeterminate;
    double tolerance = kDefaultTolerance;
};

CooperativityReport classify_cooperativity(const ParamVector& theta, double tol = kDefaultTolerance);

enum class Identifiability { Identifiable, IdentifiableOnBranchPlus, IdentifiableOnBranchMinus };
const char* to_string(Identifiability id);

Identifiability is_identifiable(const ParamVector& theta);

// lambda_{L/2} + eta_{L/2} - 1; the "+" branch is where this is >= 0.
double branch_margin(const ParamVector& theta);

}  // namespace idc::vnd
