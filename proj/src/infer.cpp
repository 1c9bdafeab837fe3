#include "idc/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "idc/error.hpp"
#include "idc/optim.hpp"

namespace idc::infer {

const char* to_string(Branch b) {
    switch (b) {
        case Branch::Auto: return "auto";
        case Branch::Plus: return "plus";
        case Branch::Minus: return "minus";
    }
    return "?";
}

void validate(const MdeOptions& o) {
    if (o.grid.empty()) throw Error(ErrorCode::InvalidParam, "grid must be nonempty");
    for (double v : o.grid) {
        if (!(v > 0.0 && v < 1.0)) throw Error(ErrorCode::InvalidParam, "grid values must lie in (0,1)");
    }
    if (!(o.objective_tol > 0.0) || o.max_iters == 0) throw Error(ErrorCode::InvalidParam, "tolerances must be positive");
    if (!(o.mu0 > 0.0 && o.mu_min > 0.0 && o.mu_factor > 0.0 && o.mu_factor < 1.0)) {
        throw Error(ErrorCode::InvalidParam, "invalid barrier schedule");
    }
    if (o.starts_per_row == 0) throw Error(ErrorCode::InvalidParam, "starts_per_row must be >= 1");
}

TransitionMatrix empirical_transition_matrix(std::span<const int> values, int L) {
    if (values.size() < 2) throw Error(ErrorCode::TooShort, "trace needs at least two samples");
    if (L < 1) throw Error(ErrorCode::InvalidParam, "L must be >= 1");
    TransitionMatrix q(L + 1);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(L) + 1, 0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] < 0 || values[k] > L) throw Error(ErrorCode::InvalidParam, "trace value outside {0..L}");
    }
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        q.at(values[k], values[k + 1]) += 1.0;
        ++counts[static_cast<std::size_t>(values[k])];
    }
    for (int i = 0; i <= L; ++i) {
        const auto c = counts[static_cast<std::size_t>(i)];
        for (int j = 0; j <= L; ++j) {
            q.at(i, j) = c > 0 ? q.at(i, j) / static_cast<double>(c) : std::numeric_limits<double>::quiet_NaN();
        }
    }
    q.row_counts = std::move(counts);
    return q;
}

TransitionMatrix empirical_transition_matrix(const DiscreteTrace& trace) {
    return empirical_transition_matrix(trace.values, trace.ladder.L);
}

namespace {

double ipow(double b, int e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

// Binomial pmf as a polynomial in p (valid for any real p, 0^0 = 1).
void binomial_pmf(int n, double p, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(n) + 1, 0.0);
    double c = 1.0;
    for (int k = 0; k <= n; ++k) {
        out[static_cast<std::size_t>(k)] = c * ipow(p, k) * ipow(1.0 - p, n - k);
        c = c * (n - k) / (k + 1);
    }
}

// Row i of Q(theta): stays-open count ~ Bin(i, eta_i), newly open ~ Bin(L-i, 1-lambda_i).
void model_row(int L, int i, double lambda_i, double eta_i, std::vector<double>& row) {
    std::vector<double> a, b;
    binomial_pmf(i, eta_i, a);
    binomial_pmf(L - i, 1.0 - lambda_i, b);
    row.assign(static_cast<std::size_t>(L) + 1, 0.0);
    for (std::size_t u = 0; u < a.size(); ++u) {
        for (std::size_t v = 0; v < b.size(); ++v) row[u + v] += a[u] * b[v];
    }
}

bool row_has_lambda(int L, int i) { return i < L; }
bool row_has_eta(int i) { return i > 0; }

struct RowPoint {
    double objective;
    double lambda;
    double eta;
};

double rel_tie_tol(double v) { return 1e-12 * std::max(std::abs(v), 1e-300) + 1e-300; }

}  // namespace

double row_objective(const TransitionMatrix& q_hat, int i, double lambda_i, double eta_i) {
    if (!q_hat.row_defined(i)) return 0.0;
    const int L = q_hat.L();
    std::vector<double> row;
    model_row(L, i, lambda_i, eta_i, row);
    double s = 0.0;
    for (int j = 0; j <= L; ++j) {
        const double d = row[static_cast<std::size_t>(j)] - q_hat.at(i, j);
        s += d * d;
    }
    return s;
}

double mde_objective(const ParamVector& theta, const TransitionMatrix& q_hat) {
    if (theta.L() + 1 != q_hat.dim || theta.eta.size() != theta.lambda.size()) {
        throw Error(ErrorCode::DimMismatch, "theta and transition matrix dimensions disagree");
    }
    const int L = theta.L();
    double s = 0.0;
    for (int i = 0; i <= L; ++i) {
        s += row_objective(q_hat, i, i < L ? theta.lam(i) : 0.0, i > 0 ? theta.eta_at(i) : 0.0);
    }
    return s;
}

namespace {

// Grid points of row i sorted by (objective, branch preference, lambda, eta).
std::vector<RowPoint> ranked_row_points(const TransitionMatrix& q_hat, int L, int i, const std::vector<double>& grid,
                                        Branch branch) {
    std::vector<double> gl = grid, ge = grid;
    std::sort(gl.begin(), gl.end());
    std::sort(ge.begin(), ge.end());
    if (!row_has_lambda(L, i)) gl = {0.0};
    if (!row_has_eta(i)) ge = {0.0};
    const bool middle = L % 2 == 0 && i == L / 2;
    std::vector<RowPoint> pts;
    for (double l : gl) {
        for (double e : ge) pts.push_back({row_objective(q_hat, i, l, e), l, e});
    }
    auto off_branch = [&](const RowPoint& p) {
        if (!middle) return 0;
        const double m = p.lambda + p.eta - 1.0;
        return branch == Branch::Minus ? (m > 0.0 ? 1 : 0) : (m < 0.0 ? 1 : 0);
    };
    std::stable_sort(pts.begin(), pts.end(), [&](const RowPoint& a, const RowPoint& b) {
        const double tol = rel_tie_tol(std::min(a.objective, b.objective));
        if (std::abs(a.objective - b.objective) > tol) return a.objective < b.objective;
        return off_branch(a) < off_branch(b);
    });
    return pts;
}

// Local minima of row i over a 0.01 lattice, best first. Rows carry at most
// two parameters, so the lattice is cheap and catches basins the coarse grid
// straddles.
std::vector<RowPoint> lattice_row_minima(const TransitionMatrix& q_hat, int L, int i) {
    constexpr int kSide = 99;
    const bool has_l = row_has_lambda(L, i), has_e = row_has_eta(i);
    const int nl = has_l ? kSide : 1, ne = has_e ? kSide : 1;
    auto coord = [](bool has, int k) { return has ? (k + 1) / 100.0 : 0.0; };
    std::vector<double> f(static_cast<std::size_t>(nl * ne));
    for (int a = 0; a < nl; ++a) {
        for (int b = 0; b < ne; ++b) f[static_cast<std::size_t>(a * ne + b)] = row_objective(q_hat, i, coord(has_l, a), coord(has_e, b));
    }
    std::vector<RowPoint> out;
    for (int a = 0; a < nl; ++a) {
        for (int b = 0; b < ne; ++b) {
            const double v = f[static_cast<std::size_t>(a * ne + b)];
            bool is_min = true;
            for (int da = -1; da <= 1 && is_min; ++da) {
                for (int db = -1; db <= 1; ++db) {
                    const int x = a + da, y = b + db;
                    if ((da == 0 && db == 0) || x < 0 || y < 0 || x >= nl || y >= ne) continue;
                    if (f[static_cast<std::size_t>(x * ne + y)] < v) {
                        is_min = false;
                        break;
                    }
                }
            }
            if (is_min) out.push_back({v, coord(has_l, a), coord(has_e, b)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const RowPoint& x, const RowPoint& y) { return x.objective < y.objective; });
    return out;
}

// Coarse-grid starts followed by lattice minima.
std::vector<RowPoint> row_starts(const TransitionMatrix& q_hat, int L, int i, const std::vector<double>& grid, Branch branch,
                                 std::size_t per_source) {
    auto pts = ranked_row_points(q_hat, L, i, grid, branch);
    if (pts.size() > per_source) pts.resize(per_source);
    auto extra = lattice_row_minima(q_hat, L, i);
    if (extra.size() > per_source) extra.resize(per_source);
    pts.insert(pts.end(), extra.begin(), extra.end());
    return pts;
}

void set_row(ParamVector& theta, int i, double lambda_i, double eta_i) {
    if (i < theta.L()) theta.lambda[static_cast<std::size_t>(i)] = lambda_i;
    if (i > 0) theta.eta[static_cast<std::size_t>(i - 1)] = eta_i;
}

struct RowFit {
    double lambda;
    double eta;
    double objective;
    bool converged;
    std::size_t iterations;
};

// Minimise row i from several starts; `sign` restricts the middle row of an
// even chain to sign * (lambda + eta - 1) > 0 when nonzero.
RowFit fit_row(const TransitionMatrix& q_hat, int L, int i, const std::vector<RowPoint>& starts, int sign,
               const MdeOptions& opt) {
    const bool has_l = row_has_lambda(L, i);
    const bool has_e = row_has_eta(i);
    optim::BarrierProblem prob;
    prob.dim = static_cast<std::size_t>(has_l) + static_cast<std::size_t>(has_e);
    prob.lower.assign(prob.dim, 0.0);
    prob.upper.assign(prob.dim, 1.0);
    auto unpack = [&](std::span<const double> x, double& l, double& e) {
        l = has_l ? x[0] : 0.0;
        e = has_e ? x[has_l ? 1 : 0] : 0.0;
    };
    prob.objective = [&](std::span<const double> x) {
        double l, e;
        unpack(x, l, e);
        return row_objective(q_hat, i, l, e);
    };
    if (sign != 0) prob.constraints.push_back({{double(sign), double(sign)}, -double(sign)});

    optim::BarrierOptions bo;
    bo.max_iters = opt.max_iters;
    bo.objective_tol = opt.objective_tol;
    bo.mu0 = opt.mu0;
    bo.mu_min = opt.mu_min;
    bo.mu_factor = opt.mu_factor;

    RowFit best{0.0, 0.0, std::numeric_limits<double>::infinity(), true, 0};
    std::size_t used = 0;
    for (const auto& s : starts) {
        if (used >= 2 * opt.starts_per_row) break;
        double l = s.lambda, e = s.eta;
        if (sign != 0) {
            double m = sign * (l + e - 1.0);
            if (m < 0.0) {
                const double ml = 1.0 - e, me = 1.0 - l;
                l = ml;
                e = me;
                m = -m;
            }
            if (m < 1e-3) {
                l = std::min(l + 1e-3 * sign, 1.0 - 1e-6);
                e = std::min(e + 1e-3 * sign, 1.0 - 1e-6);
                l = std::max(l, 1e-6);
                e = std::max(e, 1e-6);
            }
        }
        std::vector<double> x0;
        if (has_l) x0.push_back(l);
        if (has_e) x0.push_back(e);
        if (!(optim::min_slack(prob, x0) > 0.0)) continue;
        ++used;
        const double start_obj = prob.objective(x0);
        // A barrier weight far above the objective drags the iterate across
        // shallow ridges toward the box centre.
        bo.mu0 = std::clamp(1e-2 * start_obj, opt.mu_min, opt.mu0);
        auto r = optim::barrier_minimize(prob, x0, bo);
        RowFit cand;
        if (r.value <= start_obj) {
            unpack(r.x, cand.lambda, cand.eta);
            cand.objective = r.value;
        } else {
            cand.lambda = l;
            cand.eta = e;
            cand.objective = start_obj;
        }
        cand.converged = r.converged;
        cand.iterations = r.iterations;
        best.iterations += r.iterations;
        if (cand.objective < best.objective) {
            const auto its = best.iterations;
            best = cand;
            best.iterations = its;
        }
    }
    return best;
}

}  // namespace

ParamVector grid_init(const TransitionMatrix& q_hat, int L, const std::vector<double>& grid, Branch branch) {
    if (grid.empty()) throw Error(ErrorCode::InvalidParam, "grid must be nonempty");
    if (q_hat.dim != L + 1) throw Error(ErrorCode::DimMismatch, "transition matrix dimension must be L+1");
    ParamVector theta;
    theta.lambda.assign(static_cast<std::size_t>(L), 0.0);
    theta.eta.assign(static_cast<std::size_t>(L), 0.0);
    for (int i = 0; i <= L; ++i) {
        const auto pts = ranked_row_points(q_hat, L, i, grid, branch);
        set_row(theta, i, pts.front().lambda, pts.front().eta);
    }
    return theta;
}

MdeResult mde_fit(const TransitionMatrix& q_hat, int L, const MdeOptions& opt) {
    validate(opt);
    if (L < 1) throw Error(ErrorCode::InvalidParam, "L must be >= 1");
    if (q_hat.dim != L + 1) throw Error(ErrorCode::DimMismatch, "transition matrix dimension must be L+1");

    MdeResult res;
    auto& diag = res.diagnostics;
    const Branch init_branch = opt.branch == Branch::Minus ? Branch::Minus : Branch::Plus;
    diag.theta_init = grid_init(q_hat, L, opt.grid, init_branch);
    diag.init_objective = mde_objective(diag.theta_init, q_hat);
    res.theta_hat = diag.theta_init;

    const bool even = L % 2 == 0;
    for (int i = 0; i <= L; ++i) {
        if (!q_hat.row_defined(i)) {
            diag.masked_rows.push_back(i);
            continue;
        }
        if (even && i == L / 2) continue;
        const auto pts = row_starts(q_hat, L, i, opt.grid, Branch::Plus, opt.starts_per_row);
        const auto fit = fit_row(q_hat, L, i, pts, 0, opt);
        diag.iterations += fit.iterations;
        diag.converged = diag.converged && fit.converged;
        set_row(res.theta_hat, i, fit.lambda, fit.eta);
    }

    if (even) {
        const int mid = L / 2;
        std::vector<Branch> branches;
        if (opt.branch == Branch::Auto || opt.branch == Branch::Plus) branches.push_back(Branch::Plus);
        if (opt.branch == Branch::Auto || opt.branch == Branch::Minus) branches.push_back(Branch::Minus);
        for (Branch b : branches) {
            BranchDiagnostics bd;
            bd.branch = b;
            bd.theta = res.theta_hat;
            const int sign = b == Branch::Plus ? 1 : -1;
            if (q_hat.row_defined(mid)) {
                const auto pts = row_starts(q_hat, L, mid, opt.grid, b, opt.starts_per_row);
                const auto fit = fit_row(q_hat, L, mid, pts, sign, opt);
                diag.iterations += fit.iterations;
                bd.converged = fit.converged;
                set_row(bd.theta, mid, fit.lambda, fit.eta);
            } else {
                // Unvisited middle row: keep the initial value, mirrored onto the branch.
                const double l = bd.theta.lam(mid), e = bd.theta.eta_at(mid);
                if (sign * (l + e - 1.0) < 0.0) set_row(bd.theta, mid, 1.0 - e, 1.0 - l);
            }
            bd.objective = mde_objective(bd.theta, q_hat);
            diag.branches.push_back(bd);
        }
        const BranchDiagnostics* pick = &diag.branches.front();
        for (const auto& bd : diag.branches) {
            const double tol = 1e-9 * std::max(std::abs(pick->objective), 1e-300);
            if (bd.objective < pick->objective - tol) pick = &bd;
        }
        res.theta_hat = pick->theta;
        diag.chosen_branch = pick->branch;
        diag.converged = diag.converged && pick->converged;
    }

    res.objective = mde_objective(res.theta_hat, q_hat);
    if (res.objective > diag.init_objective) {
        res.theta_hat = diag.theta_init;
        res.objective = diag.init_objective;
    }
    diag.degenerate = !diag.masked_rows.empty();
    return res;
}

vnd::CooperativityReport cooperativity_report(const ParamVector& theta_hat, double tol) {
    return vnd::classify_cooperativity(theta_hat, tol);
}

double l2_distance(const ParamVector& a, const ParamVector& b) {
    const auto x = a.flat(), y = b.flat();
    if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, "parameter vectors differ in length");
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return std::sqrt(s);
}

double linf_distance(const ParamVector& a, const ParamVector& b) {
    const auto x = a.flat(), y = b.flat();
    if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, "parameter vectors differ in length");
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s = std::max(s, std::abs(x[k] - y[k]));
    return s;
}

}  // namespace idc::infer
