#include "nlkg/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace nlkg {

RateFit fit_rate(const Vec& t, const Vec& v, double t_lo, double t_hi) {
    if (t.size() != v.size()) throw NumericalError("fit_rate: time and value series differ in length");
    Vec x, y;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(v[i] > 0.0))
            throw NumericalError(fmt::format("fit_rate: nonpositive value {:.3g} at t = {:.6g}", v[i], t[i]));
        x.push_back(t[i]);
        y.push_back(std::log(v[i]));
    }
    const int n = static_cast<int>(x.size());
    if (n < 5) throw NumericalError(fmt::format("fit_rate: only {} samples in [{}, {}]", n, t_lo, t_hi));
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw NumericalError("fit_rate: degenerate window");
    RateFit f;
    f.samples = n;
    f.rate = sxy / sxx;
    f.intercept = my - f.rate * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

// ---------------------------------------------------------------- projections

Alphas project_alphas(const FieldState& W, const DeviationModel& model) {
    Alphas a;
    for (int k = 0; k < model.size(); ++k) {
        a.plus.push_back(inner_product(W, model.profile(k, SpectralBundle::Profile::Zp, W.t), model.grid()));
        a.minus.push_back(inner_product(W, model.profile(k, SpectralBundle::Profile::Zm, W.t), model.grid()));
    }
    return a;
}

Alphas project_alphas(const FieldState& state, const FieldState& reference, const DeviationModel& model) {
    if (state.u1.size() != reference.u1.size() || static_cast<int>(state.u1.size()) != model.grid().n)
        throw NumericalError("project_alphas: grid mismatch");
    FieldState W = state - reference;
    W.t = state.t;
    return project_alphas(W, model);
}

double modulate_center(const FieldState& state, const DeviationModel& model, int k, double tol, int max_iter) {
    const Grid& grid = model.grid();
    const GroundState& gs = model.ground_state();
    const SolitonSpec& sp = model.spec(k);
    const double g = sp.gamma(), be = sp.beta, t = state.t;
    const int n = grid.n;
    double c = sp.center(t);
    FieldState R(n), dR(n), ddR(n);
    auto build = [&](double center) {
        for (int i = 0; i < n; ++i) {
            double y = g * wrap_periodic(grid.x(i) - center, grid.half_width);
            double q1 = gs.dQ(y), q2 = gs.d2Q(y), q3 = gs.d3Q(y);
            R.u1[i] = gs.Q(y);
            R.u2[i] = -be * g * q1;
            dR.u1[i] = g * q1;
            dR.u2[i] = -be * g * g * q2;
            ddR.u1[i] = g * g * q2;
            ddR.u2[i] = -be * g * g * g * q3;
        }
    };
    const double scale = l2_norm(state, grid);
    for (int it = 0; it < max_iter; ++it) {
        build(c);
        FieldState W = state - R;
        double val = inner_product(W, dR, grid);
        double dd = inner_product(dR, dR, grid);
        double der = dd - inner_product(W, ddR, grid);
        if (std::fabs(der) < 1e-3 * dd) throw NumericalError("modulate_center: derivative near zero");
        double step = val / der;
        c -= step;
        if (std::fabs(step) > grid.half_width) throw NumericalError("modulate_center: Newton diverged");
        if (std::fabs(step) <= tol || std::fabs(val) <= tol * scale * std::sqrt(dd)) return c - sp.center(t);
    }
    throw NumericalError(fmt::format("modulate_center: no convergence in {} iterations", max_iter));
}

ModulationSample modulate_full(const FieldState& Z, const DeviationModel& model) {
    using P = SpectralBundle::Profile;
    const int N = model.size();
    const Grid& grid = model.grid();
    const double t = Z.t;
    std::vector<FieldState> dR(N), Y(N), Zm(N);
    for (int i = 0; i < N; ++i) {
        dR[i] = model.profile(i, P::dR, t);
        Y[i] = model.profile(i, P::Yp, t);
        Zm[i] = model.profile(i, P::Zm, t);
    }
    // Rows: tests against d_x R_k then Z-,k. Columns: d_x R_l then Y+,l.
    Eigen::MatrixXd G(2 * N, 2 * N);
    Eigen::VectorXd rhs(2 * N);
    for (int k = 0; k < N; ++k) {
        rhs(k) = inner_product(Z, dR[k], grid);
        rhs(N + k) = inner_product(Z, Zm[k], grid);
        for (int l = 0; l < N; ++l) {
            G(k, l) = inner_product(dR[l], dR[k], grid);
            G(k, N + l) = inner_product(Y[l], dR[k], grid);
            G(N + k, l) = inner_product(dR[l], Zm[k], grid);
            G(N + k, N + l) = inner_product(Y[l], Zm[k], grid);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
    const auto& sv = svd.singularValues();
    if (!(sv(2 * N - 1) > 1e-12 * sv(0))) throw NumericalError("modulate_full: singular Gram matrix");
    Eigen::VectorXd x = G.partialPivLu().solve(rhs);

    ModulationSample s;
    s.t = t;
    s.E = Z;
    for (int i = 0; i < N; ++i) {
        s.a.push_back(x(i));
        s.b.push_back(x(N + i));
        s.a_leading.push_back(rhs(i) / G(i, i));
        s.b_leading.push_back(rhs(N + i));
        axpy(-x(i), dR[i], s.E);
        axpy(-x(N + i), Y[i], s.E);
    }
    for (int k = 0; k < N; ++k) {
        s.orth_residual = std::max(s.orth_residual, std::fabs(inner_product(s.E, dR[k], grid)));
        s.orth_residual = std::max(s.orth_residual, std::fabs(inner_product(s.E, Zm[k], grid)));
    }
    return s;
}

// ---------------------------------------------------------------- cut-offs

double cutoff_psi(double x) { return 2.0 / std::numbers::pi * std::atan(std::exp(-x)); }

std::vector<int> position_order(double t, const std::vector<SolitonSpec>& specs) {
    std::vector<int> idx(specs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return specs[a].center(t) < specs[b].center(t); });
    return idx;
}

std::vector<Vec> cutoff_psi_phi(double t, const Grid& grid, const std::vector<SolitonSpec>& specs) {
    if (!(t > 0.0)) throw ConfigError("cut-off functions need t > 0");
    const int N = static_cast<int>(specs.size()), n = grid.n;
    std::vector<Vec> phi(N, Vec(n, 0.0));
    if (N == 1) {
        phi[0].assign(n, 1.0);
        return phi;
    }
    const auto eta = position_order(t, specs);
    const double st = std::sqrt(t);
    Vec lower(n, 0.0);  // psi_{k-1}
    for (int k = 0; k < N; ++k) {
        Vec& out = phi[eta[k]];
        if (k == N - 1) {
            for (int i = 0; i < n; ++i) out[i] = 1.0 - lower[i];
            break;
        }
        double m = 0.5 * (specs[eta[k]].center(t) + specs[eta[k + 1]].center(t));
        for (int i = 0; i < n; ++i) {
            double psi = cutoff_psi((grid.x(i) - m) / st);
            out[i] = psi - lower[i];
            lower[i] = psi;
        }
    }
    return phi;
}

double lyapunov_FW(const FieldState& W, double t, const DeviationModel& model, const std::vector<Vec>& phi) {
    const Grid& grid = model.grid();
    const Nonlinearity& nl = model.nonlinearity();
    if (static_cast<int>(phi.size()) != model.size()) throw NumericalError("lyapunov_FW: one cut-off per soliton");
    Vec wx = model.fft().derivative(W.u1);
    double total = 0.0;
    for (int k = 0; k < model.size(); ++k) {
        Vec Q = model.profile(k, SpectralBundle::Profile::R, t).u1;
        const double be = model.spec(k).beta;
        double s = 0.0;
        for (int i = 0; i < grid.n; ++i) {
            double w1 = W.u1[i], w2 = W.u2[i];
            s += (w1 * w1 + wx[i] * wx[i] + w2 * w2 - nl.df(Q[i]) * w1 * w1 + 2.0 * be * wx[i] * w2) * phi[k][i];
        }
        total += s * grid.h();
    }
    return total;
}

// ---------------------------------------------------------------- chi

namespace {

struct ChiLayout {
    Vec p, beta;  // positions and velocities left to right
};

ChiLayout chi_layout(double t, double delta, const std::vector<SolitonSpec>& specs) {
    if (!(t > 0.0)) throw ConfigError("chi profile needs t > 0");
    if (!(delta > 0.0 && delta < 0.25)) throw ConfigError(fmt::format("chi delta = {} outside (0, 1/4)", delta));
    ChiLayout L;
    for (int i : position_order(t, specs)) {
        L.p.push_back(specs[i].center(t));
        L.beta.push_back(specs[i].beta);
    }
    for (size_t i = 1; i < L.p.size(); ++i) {
        if (!(L.p[i] > L.p[i - 1])) throw ConfigError("chi profile: solitons coincide");
        if (!(L.beta[i] > L.beta[i - 1])) throw ConfigError("chi profile: velocities not increasing left to right");
    }
    return L;
}

}  // namespace

ChiValue chi_profile(double t, double x, double delta, const std::vector<SolitonSpec>& specs) {
    ChiLayout L = chi_layout(t, delta, specs);
    const size_t N = L.p.size();
    for (size_t i = 0; i + 1 < N; ++i) {
        double d = L.p[i + 1] - L.p[i];
        double a = L.p[i] + delta * d, b = L.p[i + 1] - delta * d;
        if (x <= a) return {L.beta[i], 0.0};
        if (x < b) {
            double slope = (L.beta[i + 1] - L.beta[i]) / ((1.0 - 2.0 * delta) * d);
            return {L.beta[i] + slope * (x - a), slope};
        }
    }
    return {L.beta[N - 1], 0.0};
}

Vec chi_samples(double t, double delta, const std::vector<SolitonSpec>& specs, const Grid& grid, Vec* slope) {
    Vec v(grid.n);
    if (slope) slope->resize(grid.n);
    for (int i = 0; i < grid.n; ++i) {
        ChiValue c = chi_profile(t, grid.x(i), delta, specs);
        v[i] = c.value;
        if (slope) (*slope)[i] = c.slope;
    }
    return v;
}

double default_delta(const std::vector<SolitonSpec>& specs) {
    if (specs.size() < 2) return 0.1;
    Vec b;
    for (const auto& s : specs) b.push_back(s.beta);
    std::sort(b.begin(), b.end());
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (size_t i = 1; i < b.size(); ++i) {
        lo = std::min(lo, b[i] - b[i - 1]);
        hi = std::max(hi, b[i] - b[i - 1]);
    }
    return std::min(0.1, lo / (4.0 * hi));
}

std::vector<std::pair<double, double>> omega_intervals(double t, double delta, const std::vector<SolitonSpec>& specs) {
    ChiLayout L = chi_layout(t, delta, specs);
    std::vector<std::pair<double, double>> out;
    for (size_t i = 0; i + 1 < L.p.size(); ++i) {
        double d = L.p[i + 1] - L.p[i];
        out.emplace_back(L.p[i] + delta * d, L.p[i + 1] - delta * d);
    }
    return out;
}

double lyapunov_F(const FieldState& z, const Vec& chi, const Vec& phi1, const Nonlinearity& nl, const Fourier& fft) {
    const Grid& grid = fft.grid();
    Vec zx = fft.derivative(z.u1);
    double s = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        double a = z.u1[i], b = z.u2[i];
        s += zx[i] * zx[i] + b * b + a * a - nl.df(phi1[i]) * a * a + 2.0 * chi[i] * zx[i] * b;
    }
    return s * grid.h();
}

// ---------------------------------------------------------------- monotonicity

namespace {

// Minimizes sum(c1 a_i + c2 b_i) subject to c1 a_i + c2 b_i >= D_i, c >= 0, by
// enumerating the vertices of the feasible region.
std::pair<double, double> envelope_lp(const Vec& a, const Vec& b, const Vec& D) {
    const size_t n = D.size();
    bool any = false;
    for (double d : D) any = any || d > 0.0;
    if (!any) return {0.0, 0.0};
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    auto feasible = [&](double c1, double c2) {
        if (c1 < 0.0 || c2 < 0.0) return false;
        for (size_t i = 0; i < n; ++i) {
            double env = c1 * a[i] + c2 * b[i];
            if (env < D[i] - 1e-12 * std::fabs(D[i])) return false;
        }
        return true;
    };
    double best = std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{0.0, 0.0};
    auto consider = [&](double c1, double c2) {
        if (!std::isfinite(c1) || !std::isfinite(c2) || !feasible(c1, c2)) return;
        double obj = c1 * sa + c2 * sb;
        if (obj < best) {
            best = obj;
            arg = {c1, c2};
        }
    };
    double c1max = 0.0, c2max = 0.0;
    bool c1ok = true, c2ok = true;
    for (size_t i = 0; i < n; ++i) {
        if (D[i] <= 0.0) continue;
        if (a[i] > 0.0) c1max = std::max(c1max, D[i] / a[i]); else c1ok = false;
        if (b[i] > 0.0) c2max = std::max(c2max, D[i] / b[i]); else c2ok = false;
    }
    if (c1ok) consider(c1max, 0.0);
    if (c2ok) consider(0.0, c2max);
    for (size_t i = 0; i < n; ++i) {
        if (D[i] <= 0.0) continue;
        for (size_t j = i + 1; j < n; ++j) {
            if (D[j] <= 0.0) continue;
            double det = a[i] * b[j] - a[j] * b[i];
            if (det == 0.0) continue;
            consider((D[i] * b[j] - D[j] * b[i]) / det, (a[i] * D[j] - a[j] * D[i]) / det);
        }
    }
    if (!std::isfinite(best)) throw NumericalError("monotonicity envelope: no feasible nonnegative fit");
    return arg;
}

}  // namespace

MonotonicityReport check_monotonicity(const Vec& t_in, const Vec& F_in, const Vec& aps_in, const Vec& Z_in,
                                      double lambda, double gamma, double factor) {
    const size_t n = t_in.size();
    if (F_in.size() != n || aps_in.size() != n || Z_in.size() != n)
        throw NumericalError("check_monotonicity: series differ in length");
    if (n < 7) throw NumericalError(fmt::format("check_monotonicity: {} samples are too few", n));
    std::vector<size_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return t_in[a] < t_in[b]; });
    Vec t(n), F(n), aps(n), Z(n);
    for (size_t i = 0; i < n; ++i) {
        t[i] = t_in[ord[i]];
        F[i] = F_in[ord[i]];
        aps[i] = aps_in[ord[i]];
        Z[i] = Z_in[ord[i]];
        if (i > 0 && !(t[i] > t[i - 1])) throw NumericalError("check_monotonicity: repeated sample time");
    }
    MonotonicityReport rep;
    Vec a, b, D;
    double Fmax = 0.0, hmin = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) Fmax = std::max(Fmax, std::fabs(F[i]));
    for (size_t i = 1; i < n; ++i) hmin = std::min(hmin, t[i] - t[i - 1]);
    for (size_t i = 1; i + 1 < n; ++i) {
        double dF = (F[i + 1] - F[i - 1]) / (t[i + 1] - t[i - 1]);
        rep.t.push_back(t[i]);
        D.push_back(-dF - lambda / t[i] * F[i]);
        a.push_back(aps[i] / t[i]);
        b.push_back(std::exp(-gamma * t[i]) * Z[i] * Z[i] + Z[i] * Z[i] * Z[i]);
    }
    const size_t m = D.size(), half = m / 2;
    Vec a1(a.begin(), a.begin() + half), b1(b.begin(), b.begin() + half), D1(D.begin(), D.begin() + half);
    auto [c1, c2] = envelope_lp(a1, b1, D1);
    rep.c1 = c1;
    rep.c2 = c2;
    rep.samples = static_cast<int>(m);
    rep.defect = D;
    // Rounding in the centered difference of F.
    const double noise = 1e3 * std::numeric_limits<double>::epsilon() * Fmax / hmin;
    for (size_t i = 0; i < m; ++i) {
        double env = c1 * a[i] + c2 * b[i];
        rep.envelope.push_back(env);
        if (i < half) continue;
        if (env > 0.0) rep.max_ratio = std::max(rep.max_ratio, D[i] / env);
        if (D[i] > factor * env + noise) ++rep.violations;
    }
    rep.passed = rep.violations == 0;
    return rep;
}

// ---------------------------------------------------------------- amplitudes

Plateau extract_A(const Vec& t, const Vec& alpha_minus, double e, double tol) {
    if (t.size() != alpha_minus.size() || t.empty()) throw NumericalError("extract_A: empty or mismatched series");
    auto [lo_it, hi_it] = std::minmax_element(t.begin(), t.end());
    const double cut = *hi_it - (*hi_it - *lo_it) / 3.0;
    Vec v;
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] >= cut) v.push_back(std::exp(e * t[i]) * alpha_minus[i]);
    if (v.size() < 3) throw NumericalError("extract_A: fewer than three samples in the late window");
    Plateau p;
    p.samples = static_cast<int>(v.size());
    p.value = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    for (double x : v) p.error = std::max(p.error, std::fabs(x - p.value));
    if (p.error > tol + 0.05 * std::fabs(p.value))
        throw NumericalError(
            fmt::format("extract_A: no plateau (value {:.6g}, drift {:.3g})", p.value, p.error));
    return p;
}

Vec projection_series(const DeviationModel& model, const FamilyTrajectory& member, const FamilyTrajectory& base,
                      int j) {
    if (member.size() != base.size()) throw NumericalError("projection_series: trajectories sampled differently");
    Vec out;
    for (size_t s = 0; s < member.size(); ++s) {
        FieldState Z = member.difference(base, s, model);
        out.push_back(inner_product(Z, model.profile(j, SpectralBundle::Profile::Zm, Z.t), model.grid()));
    }
    return out;
}

DecayCheck verify_decay(const Vec& t_in, const Vec& A_in, double rho, double tol) {
    const size_t n = t_in.size();
    if (A_in.size() != n || n < 10) throw NumericalError("verify_decay: need at least ten samples");
    std::vector<size_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return t_in[a] < t_in[b]; });
    Vec t(n), A(n);
    for (size_t i = 0; i < n; ++i) {
        t[i] = t_in[ord[i]];
        A[i] = A_in[ord[i]];
        if (!(A[i] > 0.0)) throw NumericalError("verify_decay: series must be positive");
    }
    DecayCheck out;
    // xi(t) >= |(log A)' + rho|, trapezoid integral of the centered estimate.
    Vec xi(n);
    for (size_t i = 0; i < n; ++i) {
        size_t l = i == 0 ? 0 : i - 1, r = i + 1 == n ? n - 1 : i + 1;
        xi[i] = std::fabs((std::log(A[r]) - std::log(A[l])) / (t[r] - t[l]) + rho);
    }
    for (size_t i = 1; i < n; ++i) out.xi_integral += 0.5 * (xi[i] + xi[i - 1]) * (t[i] - t[i - 1]);
    const double mid = 0.5 * (t.front() + t.back());
    RateFit f = fit_rate(t, A, mid, t.back());
    out.rate = f.rate;
    out.r2 = f.r2;
    out.passed = f.rate <= -rho + tol;
    return out;
}

// ---------------------------------------------------------------- family

FamilyAnalysis analyze_family(const DeviationModel& model, const std::vector<FieldState>& Z_in,
                              const std::vector<FieldState>& base_in, const Vec& A, double sigma,
                              const AnalysisConfig& cfg, double t_lo, double t_hi) {
    using P = SpectralBundle::Profile;
    const int N = model.size();
    const size_t n = Z_in.size();
    if (n < 7) throw NumericalError(fmt::format("analyze_family: {} samples are too few (need 7)", n));
    if (base_in.size() != n) throw NumericalError("analyze_family: deviation and base sampled differently");
    if (static_cast<int>(A.size()) != N) throw NumericalError("analyze_family: one amplitude per soliton required");
    std::vector<size_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return Z_in[a].t < Z_in[b].t; });

    std::vector<SolitonSpec> specs;
    for (int k = 0; k < N; ++k) specs.push_back(model.spec(k));
    FamilyAnalysis fa;
    fa.delta = cfg.delta > 0.0 ? cfg.delta : default_delta(specs);
    fa.lambda = cfg.lambda_exp;
    fa.gamma = cfg.gamma;
    if (fa.gamma <= 0.0) {
        double gap = 1.0;
        if (N > 1) {
            Vec b;
            for (const auto& s : specs) b.push_back(s.beta);
            std::sort(b.begin(), b.end());
            gap = std::numeric_limits<double>::infinity();
            for (size_t i = 1; i < b.size(); ++i) gap = std::min(gap, b[i] - b[i - 1]);
        }
        fa.gamma = 0.5 * sigma * fa.delta * gap;
    }
    fa.alpha_plus.assign(N, Vec());
    fa.alpha_minus.assign(N, Vec());
    fa.mod_a.assign(N, Vec());
    fa.mod_b.assign(N, Vec());

    for (size_t q = 0; q < n; ++q) {
        const FieldState& Z = Z_in[ord[q]];
        const FieldState& B = base_in[ord[q]];
        if (Z.size() != model.grid().n || B.size() != model.grid().n)
            throw NumericalError("analyze_family: state does not match the grid");
        const double t = Z.t;
        fa.t.push_back(t);
        Alphas al = project_alphas(Z, model);
        double aps = 0.0;
        for (int k = 0; k < N; ++k) {
            fa.alpha_plus[k].push_back(al.plus[k]);
            fa.alpha_minus[k].push_back(al.minus[k]);
            aps += al.plus[k] * al.plus[k];
        }
        fa.alpha_plus_sq.push_back(aps);
        const double zn = energy_norm(Z, model.fft());
        fa.Znorm.push_back(zn);

        FieldState rem = Z;
        for (int k = 0; k < N; ++k)
            if (A[k] != 0.0) axpy(-A[k] * std::exp(-model.rate(k) * t), model.profile(k, P::Yp, t), rem);
        fa.remainder.push_back(energy_norm(rem, model.fft()));

        // eps = Z - sum a_i d_x R_i: the translation-modulated deviation.
        ModulationSample ms = modulate_full(Z, model);
        FieldState eps = Z;
        for (int k = 0; k < N; ++k) {
            fa.mod_a[k].push_back(ms.a[k]);
            fa.mod_b[k].push_back(ms.b[k]);
            axpy(-ms.a[k], model.profile(k, P::dR, t), eps);
        }
        if (zn > 0.0) fa.max_orth_residual = std::max(fa.max_orth_residual, ms.orth_residual / zn);
        Vec chi = chi_samples(t, fa.delta, specs, model.grid());
        fa.F.push_back(lyapunov_F(eps, chi, B.u1, model.nonlinearity(), model.fft()));
    }

    for (int k = 0; k < N; ++k) {
        try {
            fa.A.push_back(extract_A(fa.t, fa.alpha_minus[k], model.rate(k), cfg.plateau_tol));
            fa.A_error.emplace_back();
        } catch (const NumericalError& e) {
            fa.A.emplace_back();
            fa.A_error.emplace_back(e.what());
        }
    }
    bool all_positive = std::all_of(fa.Znorm.begin(), fa.Znorm.end(), [](double v) { return v > 0.0; });
    if (all_positive) fa.Z_fit = fit_rate(fa.t, fa.Znorm, t_lo, t_hi);
    try {
        fa.remainder_fit = fit_rate(fa.t, fa.remainder, t_lo, t_hi);
        fa.remainder_fit_ok = true;
    } catch (const NumericalError&) {
        fa.remainder_fit_ok = false;
    }
    fa.monotonicity = check_monotonicity(fa.t, fa.F, fa.alpha_plus_sq, fa.Znorm, fa.lambda, fa.gamma, cfg.factor);
    return fa;
}

}  // namespace nlkg
