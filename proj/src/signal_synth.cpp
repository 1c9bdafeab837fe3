#include "idc/signal_synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "idc/error.hpp"
#include "idc/rng.hpp"

namespace idc {

double StepFunction::value_at(double t) const {
    if (levels.empty()) return 0.0;
    // Last breakpoint index j with breakpoints[j] <= t.
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end() - 1, t);
    auto j = static_cast<std::size_t>(std::distance(breakpoints.begin(), it));
    j = j == 0 ? 0 : j - 1;
    return levels[std::min(j, levels.size() - 1)];
}

bool Kernel::symmetric(double tol) const {
    for (std::size_t i = 0, j = taps.size() - 1; i < j; ++i, --j) {
        if (std::abs(taps[i] - taps[j]) > tol) return false;
    }
    return true;
}

namespace synth {

const char* to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Identity: return "identity";
        case KernelKind::BSpline2: return "bspline2";
        case KernelKind::BesselFIR: return "bessel";
        case KernelKind::Custom: return "custom";
    }
    return "identity";
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Cauchy: return "cauchy";
        case NoiseKind::Mixture: return "mixture";
    }
    return "gaussian";
}

StepFunction step_from_trace(std::span<const int> trace, double offset, double spacing, double sample_rate) {
    if (trace.empty()) throw Error(ErrorCode::EmptyTrace, "cannot build a step function from an empty trace");
    if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidParam, "spacing must be positive");
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    StepFunction f;
    f.breakpoints.push_back(0.0);
    f.levels.push_back(offset + spacing * trace[0]);
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (trace[k] != trace[k - 1]) {
            f.breakpoints.push_back(static_cast<double>(k) / sample_rate);
            f.levels.push_back(offset + spacing * trace[k]);
        }
    }
    f.breakpoints.push_back(static_cast<double>(trace.size()) / sample_rate);
    return f;
}

namespace {

using cplx = std::complex<double>;

// Coefficients a_0..a_N of the reverse Bessel polynomial (a_N = 1).
std::vector<double> bessel_coefficients(int order) {
    std::vector<double> a(static_cast<std::size_t>(order + 1));
    for (int k = 0; k <= order; ++k) {
        // (2N-k)! / (2^(N-k) k! (N-k)!)
        const double lg = std::lgamma(2.0 * order - k + 1) - (order - k) * std::log(2.0) - std::lgamma(k + 1.0) -
                          std::lgamma(order - k + 1.0);
        a[k] = std::round(std::exp(lg));
    }
    return a;
}

cplx polyval(const std::vector<double>& a, cplx s) {
    cplx acc = 0.0;
    for (std::size_t k = a.size(); k-- > 0;) acc = acc * s + a[k];
    return acc;
}

// Durand-Kerner iteration for the roots of a monic polynomial.
std::vector<cplx> polyroots(const std::vector<double>& a) {
    const auto n = a.size() - 1;
    std::vector<cplx> z(n);
    const cplx seed(0.4, 0.9);
    for (std::size_t k = 0; k < n; ++k) z[k] = std::pow(seed, static_cast<double>(k)) * 2.0;
    for (int it = 0; it < 2000; ++it) {
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            cplx denom = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != k) denom *= (z[k] - z[j]);
            }
            const cplx step = polyval(a, z[k]) / denom;
            z[k] -= step;
            change = std::max(change, std::abs(step));
        }
        if (change < 1e-15) break;
    }
    return z;
}

std::vector<double> bessel_taps(int order, double cutoff_hz, double sample_rate) {
    const auto a = bessel_coefficients(order);
    const double a0 = a[0];
    auto gain = [&](double w) { return std::abs(a0 / polyval(a, cplx(0.0, w))); };
    // -3 dB frequency of the unit-scaled prototype.
    double lo = 1e-6, hi = 100.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gain(mid) > std::sqrt(0.5)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double w3 = 0.5 * (lo + hi);
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / w3;

    auto roots = polyroots(a);
    std::vector<cplx> poles(roots.size());
    for (std::size_t k = 0; k < roots.size(); ++k) poles[k] = roots[k] * w0;

    // H(s) = a0 w0^N / prod(s - p_k); residues r_k; step response
    // s(t) = sum_k r_k / p_k (exp(p_k t) - 1).
    std::vector<cplx> res(poles.size());
    for (std::size_t k = 0; k < poles.size(); ++k) {
        cplx denom = 1.0;
        for (std::size_t j = 0; j < poles.size(); ++j) {
            if (j != k) denom *= poles[k] - poles[j];
        }
        res[k] = a0 * std::pow(w0, static_cast<double>(order)) / denom;
    }
    auto step = [&](double t) {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < poles.size(); ++k) acc += res[k] / poles[k] * (std::exp(poles[k] * t) - 1.0);
        return acc.real();
    };

    const double dt = 1.0 / sample_rate;
    std::vector<double> taps;
    double prev = 0.0;
    double cumulative = 0.0;
    for (std::size_t m = 0; m < 1000000; ++m) {
        const double cur = step(static_cast<double>(m + 1) * dt);
        // The analog response undershoots by a tiny amount; negative cell
        // masses are clipped so the kernel stays nonnegative.
        const double tap = std::max(0.0, cur - prev);
        prev = cur;
        taps.push_back(tap);
        cumulative += tap;
        if (cumulative >= 1.0 - kBesselTailMass) break;
    }
    const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
    for (double& t : taps) t /= total;
    return taps;
}

void normalise(std::vector<double>& taps) {
    const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
    for (double& t : taps) t /= total;
}

}  // namespace

Kernel make_kernel(const KernelSpec& spec, double sample_rate) {
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    Kernel k;
    k.kind = spec.kind;
    switch (spec.kind) {
        case KernelKind::Identity:
            k.taps = {1.0};
            break;
        case KernelKind::BSpline2:
            // Cell integrals of the quadratic B-spline (three one-sample boxes
            // convolved), i.e. the cubic B-spline at the integers.
            k.taps = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
            break;
        case KernelKind::BesselFIR:
            if (spec.bessel_order < 1 || spec.bessel_order > 10) {
                throw Error(ErrorCode::InvalidParam, "Bessel order must lie in [1, 10]");
            }
            if (!(spec.bessel_cutoff_hz > 0.0) || spec.bessel_cutoff_hz >= 0.5 * sample_rate) {
                throw Error(ErrorCode::InvalidParam, "Bessel cutoff must lie in (0, sample_rate / 2)");
            }
            k.taps = bessel_taps(spec.bessel_order, spec.bessel_cutoff_hz, sample_rate);
            k.bessel_order = spec.bessel_order;
            k.bessel_cutoff_hz = spec.bessel_cutoff_hz;
            break;
        case KernelKind::Custom: {
            if (spec.custom_taps.empty()) throw Error(ErrorCode::InvalidParam, "custom kernel needs taps");
            double total = 0.0;
            for (double t : spec.custom_taps) {
                if (!(t >= 0.0)) throw Error(ErrorCode::InvalidParam, "kernel taps must be nonnegative");
                total += t;
            }
            if (!(total > 0.0)) throw Error(ErrorCode::InvalidParam, "kernel taps must not all be zero");
            k.taps = spec.custom_taps;
            normalise(k.taps);
            break;
        }
    }
    return k;
}

std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps) {
    std::vector<double> y(x.size(), 0.0);
    if (x.empty()) return y;
    const double first = x[0];
    for (std::size_t k = 0; k < x.size(); ++k) {
        double acc = 0.0;
        for (std::size_t m = 0; m < taps.size(); ++m) {
            const double v = m <= k ? x[k - m] : first;
            acc += taps[m] * v;
        }
        y[k] = acc;
    }
    return y;
}

std::vector<double> convolve_sample(const StepFunction& f, const Kernel& kernel, double sample_rate, std::size_t n) {
    if (f.levels.empty()) throw Error(ErrorCode::EmptyTrace, "step function has no levels");
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    const double needed = static_cast<double>(n) / sample_rate;
    if (needed > f.t_max() * (1.0 + 1e-12)) {
        throw Error(ErrorCode::DomainExceeded, "requested samples extend beyond t_max");
    }
    std::vector<double> sampled(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        // Cell k starts at t = k / rate; breakpoints sit on cell boundaries.
        const double t = (static_cast<double>(k) + 0.5) / sample_rate;
        while (seg + 1 < f.levels.size() && f.breakpoints[seg + 1] <= t) ++seg;
        sampled[k] = f.levels[seg];
    }
    return fir_filter(sampled, kernel.taps);
}

void validate(const NoiseSpec& noise) {
    switch (noise.kind) {
        case NoiseKind::Gaussian:
            if (!(noise.sigma > 0.0)) throw Error(ErrorCode::InvalidParam, "Gaussian sigma must be positive");
            break;
        case NoiseKind::Cauchy:
            if (!(noise.scale > 0.0)) throw Error(ErrorCode::InvalidParam, "Cauchy scale must be positive");
            break;
        case NoiseKind::Mixture:
            if (!(noise.sigma > 0.0) || !(noise.scale > 0.0)) {
                throw Error(ErrorCode::InvalidParam, "mixture sigma and scale must be positive");
            }
            if (!(noise.weight_gaussian >= 0.0 && noise.weight_gaussian <= 1.0)) {
                throw Error(ErrorCode::InvalidParam, "mixture weight must lie in [0,1]");
            }
            break;
    }
}

std::string describe(const NoiseSpec& noise) {
    std::ostringstream os;
    switch (noise.kind) {
        case NoiseKind::Gaussian: os << "N(0," << noise.sigma << "^2)"; break;
        case NoiseKind::Cauchy: os << "Cauchy(" << noise.scale << ")"; break;
        case NoiseKind::Mixture:
            os << noise.weight_gaussian << "*N(0," << noise.sigma << "^2)+" << (1.0 - noise.weight_gaussian)
               << "*Cauchy(" << noise.scale << ")";
            break;
    }
    if (noise.filtered) os << " filtered";
    return os.str();
}

std::vector<double> draw_noise(const NoiseSpec& noise, std::size_t n, std::uint64_t seed) {
    validate(noise);
    std::vector<double> eps(n);
    rng::Stream main(seed, rng::kNoiseStream);
    switch (noise.kind) {
        case NoiseKind::Gaussian:
            for (auto& e : eps) e = noise.sigma * main.normal();
            break;
        case NoiseKind::Cauchy:
            for (auto& e : eps) e = main.cauchy(noise.scale);
            break;
        case NoiseKind::Mixture: {
            rng::Stream select(seed, rng::kNoiseSelectStream);
            rng::Stream alt(seed, rng::kNoiseAltStream);
            for (auto& e : eps) {
                // Both components are drawn every sample so streams stay aligned.
                const double g = noise.sigma * main.normal();
                const double c = alt.cauchy(noise.scale);
                e = select.uniform() < noise.weight_gaussian ? g : c;
            }
            break;
        }
    }
    return eps;
}

Recording synthesize_from_trace(std::span<const int> trace, int L, const SynthesisConfig& config,
                                std::uint64_t seed, bool* noise_filter_disabled) {
    if (!(config.sample_rate > 0.0)) throw Error(ErrorCode::InvalidParam, "sample rate must be positive");
    Recording rec;
    rec.sample_rate = config.sample_rate;
    rec.kernel = make_kernel(config.kernel, config.sample_rate);
    const auto f = step_from_trace(trace, config.offset, config.spacing, config.sample_rate);
    rec.samples = convolve_sample(f, rec.kernel, config.sample_rate, trace.size());

    bool filtered = config.noise.filtered;
    bool disabled = false;
    if (filtered && rec.kernel.kind == KernelKind::Custom && !rec.kernel.symmetric()) {
        filtered = false;
        disabled = true;
    }
    if (noise_filter_disabled) *noise_filter_disabled = disabled;

    auto eps = draw_noise(config.noise, trace.size(), seed);
    if (filtered) eps = fir_filter(eps, rec.kernel.taps);
    for (std::size_t k = 0; k < eps.size(); ++k) rec.samples[k] += eps[k];

    DiscreteTrace truth;
    truth.values.assign(trace.begin(), trace.end());
    truth.ladder = LevelLadder{L, config.offset, config.spacing, 0.0};
    truth.sample_rate = config.sample_rate;
    rec.truth_step = f;
    rec.truth_trace = std::move(truth);
    return rec;
}

SynthesisResult synthesize_recording(const ParamVector& theta, const SynthesisConfig& config, std::uint64_t seed) {
    SynthesisResult out;
    out.joint = vnd::simulate_vnd(theta, config.n, seed, config.init);
    out.recording = synthesize_from_trace(out.joint.sum, theta.L(), config, seed, &out.noise_filter_disabled);
    out.recording.truth_theta = theta;
    return out;
}

}  // namespace synth
}  // namespace idc
