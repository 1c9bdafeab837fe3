#include "idc/vnd_model.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "idc/rng.hpp"

namespace idc {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::WrongArity: return "WrongArity";
        case ErrorCode::InvalidTheta: return "InvalidTheta";
        case ErrorCode::LTooLarge: return "LTooLarge";
        case ErrorCode::EmptyTrace: return "EmptyTrace";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::DomainExceeded: return "DomainExceeded";
        case ErrorCode::InvalidAlpha: return "InvalidAlpha";
        case ErrorCode::NoFeasibleFit: return "NoFeasibleFit";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::NoVisits: return "NoVisits";
        case ErrorCode::AllCellsSparse: return "AllCellsSparse";
        case ErrorCode::UnknownStudy: return "UnknownStudy";
        case ErrorCode::IO: return "IO";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

std::vector<double> ParamVector::flat() const {
    std::vector<double> out(lambda);
    out.insert(out.end(), eta.begin(), eta.end());
    return out;
}

ParamVector ParamVector::from_flat(std::span<const double> values) {
    if (values.size() % 2 != 0 || values.empty()) {
        throw Error(ErrorCode::WrongArity, "theta must have 2L entries with L >= 1");
    }
    const auto L = values.size() / 2;
    ParamVector p;
    p.lambda.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(L));
    p.eta.assign(values.begin() + static_cast<std::ptrdiff_t>(L), values.end());
    return p;
}

ParamVector ParamVector::constant(int L, double lambda, double eta) {
    ParamVector p;
    p.lambda.assign(static_cast<std::size_t>(L), lambda);
    p.eta.assign(static_cast<std::size_t>(L), eta);
    return p;
}

namespace vnd {

namespace {

// base^e with the combinatorial convention 0^0 = 1.
double ipow(double base, int e) {
    double out = 1.0;
    for (int k = 0; k < e; ++k) out *= base;
    return out;
}

std::vector<std::vector<double>> pascal(int n) {
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) {
        c[i].assign(static_cast<std::size_t>(i + 1), 1.0);
        for (int k = 1; k < i; ++k) c[i][k] = c[i - 1][k - 1] + c[i - 1][k];
    }
    return c;
}

double choose(const std::vector<std::vector<double>>& c, int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return c[n][k];
}

}  // namespace

std::optional<ThetaIssue> validate_theta(const ParamVector& theta) {
    const auto L = theta.lambda.size();
    if (L == 0 || theta.eta.size() != L) {
        std::ostringstream os;
        os << "lambda has " << theta.lambda.size() << " entries, eta has " << theta.eta.size()
           << "; both need L >= 1 entries";
        return ThetaIssue{ErrorCode::WrongArity, std::nullopt, os.str()};
    }
    const auto flat = theta.flat();
    for (std::size_t k = 0; k < flat.size(); ++k) {
        if (!(flat[k] >= 0.0 && flat[k] <= 1.0)) {
            std::ostringstream os;
            if (k < L) {
                os << "lambda_" << k;
            } else {
                os << "eta_" << (k - L + 1);
            }
            os << " = " << flat[k] << " is outside [0,1]";
            return ThetaIssue{ErrorCode::OutOfRange, k, os.str()};
        }
    }
    return std::nullopt;
}

void require_valid(const ParamVector& theta) {
    if (auto issue = validate_theta(theta)) {
        throw Error(ErrorCode::InvalidTheta, issue->message, issue->index);
    }
}

TransitionMatrix sum_transition_matrix(const ParamVector& theta) {
    require_valid(theta);
    const int L = theta.L();
    const auto c = pascal(L);
    TransitionMatrix q(L + 1);
    for (int i = 0; i <= L; ++i) {
        // eta_0 and lambda_L never carry a nonzero exponent.
        const double eta_i = i >= 1 ? theta.eta_at(i) : 0.0;
        const double lam_i = i < L ? theta.lam(i) : 0.0;
        for (int j = 0; j <= L; ++j) {
            double acc = 0.0;
            // r open channels close, i - r stay open, j - i + r closed ones open.
            for (int r = 0; r <= i; ++r) {
                if (j + r < i || j + r > L) continue;
                const double coef = choose(c, i, r) * choose(c, L - i, j - i + r);
                acc += coef * ipow(eta_i, i - r) * ipow(1.0 - eta_i, r) * ipow(lam_i, L - j - r) *
                       ipow(1.0 - lam_i, j - i + r);
            }
            q.at(i, j) = acc;
        }
    }
    return q;
}

double joint_transition_probability(const ParamVector& theta, std::uint32_t from, std::uint32_t to) {
    const int L = theta.L();
    const int r = std::popcount(from);
    double p = 1.0;
    for (int ch = 0; ch < L; ++ch) {
        const bool open = (from >> ch) & 1u;
        const bool next_open = (to >> ch) & 1u;
        if (open) {
            const double stay = theta.eta_at(r);
            p *= next_open ? stay : 1.0 - stay;
        } else {
            const double stay = theta.lam(r);
            p *= next_open ? 1.0 - stay : stay;
        }
    }
    return p;
}

TransitionMatrix sum_transition_matrix_bruteforce(const ParamVector& theta) {
    require_valid(theta);
    const int L = theta.L();
    if (L > 20) throw Error(ErrorCode::LTooLarge, "brute-force enumeration is limited to L <= 20");
    TransitionMatrix q(L + 1);
    const std::uint32_t count = 1u << L;
    for (int i = 0; i <= L; ++i) {
        const std::uint32_t from = (i == 0) ? 0u : ((1u << i) - 1u);
        for (std::uint32_t z = 0; z < count; ++z) {
            q.at(i, std::popcount(z)) += joint_transition_probability(theta, from, z);
        }
    }
    return q;
}

JointTrace simulate_vnd(const ParamVector& theta, std::size_t n, std::uint64_t seed, const InitialState& init) {
    require_valid(theta);
    if (n == 0) throw Error(ErrorCode::InvalidParam, "trace length must be >= 1");
    const int L = theta.L();
    JointTrace tr;
    tr.L = L;
    tr.n = n;
    tr.states.assign(n * static_cast<std::size_t>(L), 0);
    tr.sum.assign(n, 0);

    std::vector<std::uint8_t> x(static_cast<std::size_t>(L), 0);
    if (init.explicit_state) {
        if (init.explicit_state->size() != x.size()) {
            throw Error(ErrorCode::InvalidParam, "initial state must have L entries");
        }
        for (std::size_t c = 0; c < x.size(); ++c) x[c] = (*init.explicit_state)[c] ? 1 : 0;
    }

    std::vector<std::uint64_t> keys(static_cast<std::size_t>(L));
    for (int c = 0; c < L; ++c) keys[c] = rng::stream_key(seed, rng::kChannelStreamBase + c);

    for (std::size_t k = 0; k < n; ++k) {
        int r = 0;
        for (int c = 0; c < L; ++c) {
            tr.states[k * L + c] = x[c];
            r += x[c];
        }
        tr.sum[k] = r;
        if (k + 1 == n) break;
        const double stay_open = r >= 1 ? theta.eta_at(r) : 0.0;
        const double stay_closed = r < L ? theta.lam(r) : 0.0;
        for (int c = 0; c < L; ++c) {
            const double u = rng::uniform(keys[c], k);
            if (x[c]) {
                x[c] = u < stay_open ? 1 : 0;
            } else {
                x[c] = u < stay_closed ? 0 : 1;
            }
        }
    }
    return tr;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Positive: return "Positive";
        case Verdict::Negative: return "Negative";
        case Verdict::Zero: return "Zero";
        case Verdict::Indeterminate: return "Indeterminate";
    }
    return "Indeterminate";
}

CooperativityReport classify_cooperativity(const ParamVector& theta, double tol) {
    require_valid(theta);
    const int L = theta.L();
    CooperativityReport rep;
    rep.theta_hat = theta;
    rep.tolerance = tol;

    bool degenerate = false;
    for (int r = 1; r <= L - 1; ++r) {
        if (theta.lam(r) <= 0.0 || theta.eta_at(r) <= 0.0) degenerate = true;
    }
    if (L >= 2 && theta.eta_at(1) <= 0.0) degenerate = true;
    if (degenerate) {
        rep.verdict = Verdict::Indeterminate;
        return rep;
    }

    for (int r = 1; r <= L - 1; ++r) {
        rep.lambda_ratios.push_back(theta.lam(0) / theta.lam(r));
        rep.eta_open_ratios.push_back(theta.eta_at(L) / theta.eta_at(r));
        rep.eta_close_ratios.push_back(theta.eta_at(r + 1) / theta.eta_at(1));
    }

    auto all = [](const std::vector<double>& v, auto pred) {
        for (double x : v) {
            if (!pred(x)) return false;
        }
        return true;
    };
    const auto above = [tol](double x) { return x > 1.0 + tol; };
    const auto below = [tol](double x) { return x < 1.0 - tol; };
    const auto within = [tol](double x) { return x >= 1.0 - tol && x <= 1.0 + tol; };

    // A single channel has no ratios and is reported as Zero.
    if (all(rep.lambda_ratios, within) && all(rep.eta_open_ratios, within) &&
        all(rep.eta_close_ratios, within)) {
        rep.verdict = Verdict::Zero;
    } else if (all(rep.lambda_ratios, above) && all(rep.eta_open_ratios, above)) {
        rep.verdict = Verdict::Positive;
    } else if (all(rep.lambda_ratios, below) && all(rep.eta_close_ratios, below)) {
        rep.verdict = Verdict::Negative;
    } else {
        rep.verdict = Verdict::Indeterminate;
    }
    return rep;
}

const char* to_string(Identifiability id) {
    switch (id) {
        case Identifiability::Identifiable: return "Identifiable";
        case Identifiability::IdentifiableOnBranchPlus: return "IdentifiableOnBranch(+)";
        case Identifiability::IdentifiableOnBranchMinus: return "IdentifiableOnBranch(-)";
    }
    return "Identifiable";
}

double branch_margin(const ParamVector& theta) {
    const int h = theta.L() / 2;
    return theta.lam(h) + theta.eta_at(h) - 1.0;
}

Identifiability is_identifiable(const ParamVector& theta) {
    require_valid(theta);
    if (theta.L() % 2 == 1) return Identifiability::Identifiable;
    return branch_margin(theta) >= 0.0 ? Identifiability::IdentifiableOnBranchPlus
                                       : Identifiability::IdentifiableOnBranchMinus;
}

}  // namespace vnd
}  // namespace idc
