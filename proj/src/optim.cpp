#include "idc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "idc/error.hpp"

namespace idc::optim {

double min_slack(const BarrierProblem& p, std::span<const double> x) {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.dim; ++k) {
        s = std::min({s, x[k] - p.lower[k], p.upper[k] - x[k]});
    }
    for (const auto& c : p.constraints) {
        double v = c.b;
        for (std::size_t k = 0; k < p.dim; ++k) v += c.a[k] * x[k];
        s = std::min(s, v);
    }
    return s;
}

namespace {

using Vec = std::vector<double>;

double barrier(const BarrierProblem& p, std::span<const double> x, Vec* grad, Vec* hess) {
    const std::size_t d = p.dim;
    double v = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double lo = x[k] - p.lower[k];
        const double hi = p.upper[k] - x[k];
        v -= std::log(lo) + std::log(hi);
        if (grad) (*grad)[k] += -1.0 / lo + 1.0 / hi;
        if (hess) (*hess)[k * d + k] += 1.0 / (lo * lo) + 1.0 / (hi * hi);
    }
    for (const auto& c : p.constraints) {
        double s = c.b;
        for (std::size_t k = 0; k < d; ++k) s += c.a[k] * x[k];
        v -= std::log(s);
        for (std::size_t k = 0; k < d; ++k) {
            if (grad) (*grad)[k] -= c.a[k] / s;
            if (hess) {
                for (std::size_t l = 0; l < d; ++l) (*hess)[k * d + l] += c.a[k] * c.a[l] / (s * s);
            }
        }
    }
    return v;
}

// Cholesky solve of H p = -g; false when H is not positive definite.
bool newton_direction(Vec h, const Vec& g, std::size_t d, Vec& p) {
    for (std::size_t j = 0; j < d; ++j) {
        double s = h[j * d + j];
        for (std::size_t k = 0; k < j; ++k) s -= h[j * d + k] * h[j * d + k];
        if (!(s > 0.0)) return false;
        h[j * d + j] = std::sqrt(s);
        for (std::size_t i = j + 1; i < d; ++i) {
            double t = h[i * d + j];
            for (std::size_t k = 0; k < j; ++k) t -= h[i * d + k] * h[j * d + k];
            h[i * d + j] = t / h[j * d + j];
        }
    }
    Vec y(d);
    for (std::size_t i = 0; i < d; ++i) {
        double t = -g[i];
        for (std::size_t k = 0; k < i; ++k) t -= h[i * d + k] * y[k];
        y[i] = t / h[i * d + i];
    }
    p.assign(d, 0.0);
    for (std::size_t i = d; i-- > 0;) {
        double t = y[i];
        for (std::size_t k = i + 1; k < d; ++k) t -= h[k * d + i] * p[k];
        p[i] = t / h[i * d + i];
    }
    return true;
}

}  // namespace

BarrierResult barrier_minimize(const BarrierProblem& p, std::span<const double> x0, const BarrierOptions& opt) {
    const std::size_t d = p.dim;
    if (x0.size() != d || p.lower.size() != d || p.upper.size() != d) {
        throw Error(ErrorCode::DimMismatch, "barrier problem dimensions disagree");
    }
    if (!(min_slack(p, x0) > 0.0)) throw Error(ErrorCode::InvalidParam, "barrier start is not strictly feasible");

    BarrierResult res;
    Vec x(x0.begin(), x0.end());
    const double h1 = opt.fd_step;
    const double h2 = std::sqrt(opt.fd_step) * 0.1;

    auto f_at = [&](const Vec& z) { return p.objective(z); };

    for (double mu = opt.mu0; mu >= opt.mu_min * 0.999; mu *= opt.mu_factor) {
        auto total = [&](const Vec& z) { return f_at(z) + mu * barrier(p, z, nullptr, nullptr); };
        double F = total(x);
        for (;;) {
            if (res.iterations >= opt.max_iters) {
                res.converged = false;
                break;
            }
            ++res.iterations;

            Vec g(d, 0.0), H(d * d, 0.0);
            Vec z = x;
            const double f0 = f_at(x);
            for (std::size_t k = 0; k < d; ++k) {
                z[k] = x[k] + h1;
                const double fp = f_at(z);
                z[k] = x[k] - h1;
                const double fm = f_at(z);
                z[k] = x[k];
                g[k] = (fp - fm) / (2 * h1);
                z[k] = x[k] + h2;
                const double fp2 = f_at(z);
                z[k] = x[k] - h2;
                const double fm2 = f_at(z);
                z[k] = x[k];
                H[k * d + k] = (fp2 - 2 * f0 + fm2) / (h2 * h2);
                for (std::size_t l = 0; l < k; ++l) {
                    z[k] = x[k] + h2; z[l] = x[l] + h2;
                    const double fpp = f_at(z);
                    z[l] = x[l] - h2;
                    const double fpm = f_at(z);
                    z[k] = x[k] - h2;
                    const double fmm = f_at(z);
                    z[l] = x[l] + h2;
                    const double fmp = f_at(z);
                    z[k] = x[k]; z[l] = x[l];
                    H[k * d + l] = H[l * d + k] = (fpp - fpm - fmp + fmm) / (4 * h2 * h2);
                }
            }
            Vec gb(d, 0.0), Hb(d * d, 0.0);
            barrier(p, x, &gb, &Hb);
            for (std::size_t k = 0; k < d; ++k) g[k] += mu * gb[k];
            for (std::size_t k = 0; k < d * d; ++k) H[k] += mu * Hb[k];

            Vec dir;
            double damping = 0.0;
            double scale = 0.0;
            for (std::size_t k = 0; k < d; ++k) scale = std::max(scale, std::abs(H[k * d + k]));
            scale = std::max(scale, 1e-12);
            for (int attempt = 0; attempt < 40; ++attempt) {
                Vec Hd = H;
                for (std::size_t k = 0; k < d; ++k) Hd[k * d + k] += damping;
                if (newton_direction(Hd, g, d, dir)) break;
                damping = damping == 0.0 ? 1e-10 * scale : damping * 10.0;
                dir.clear();
            }
            if (dir.empty()) {
                dir.resize(d);
                for (std::size_t k = 0; k < d; ++k) dir[k] = -g[k];
            }
            double slope = 0.0;
            for (std::size_t k = 0; k < d; ++k) slope += g[k] * dir[k];
            if (!(slope < 0.0)) break;

            double t = 1.0;
            bool accepted = false;
            Vec xn(d);
            double Fn = F;
            for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
                for (std::size_t k = 0; k < d; ++k) xn[k] = x[k] + t * dir[k];
                if (!(min_slack(p, xn) > 0.0)) continue;
                Fn = total(xn);
                if (Fn <= F + 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            const double improvement = F - Fn;
            x = xn;
            F = Fn;
            if (improvement < opt.objective_tol) break;
        }
        if (!res.converged) break;
    }
    res.x = x;
    res.value = f_at(x);
    return res;
}

}  // namespace idc::optim
