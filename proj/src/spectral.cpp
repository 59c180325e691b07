#include "nlkg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <lapacke.h>

namespace nlkg {

using std::numbers::pi;

double inner_product(const Vec& a, const Vec& b, const Grid& grid) {
    if (a.size() != b.size() || static_cast<int>(a.size()) != grid.n)
        throw NumericalError("inner_product: grid mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * grid.h();
}

double inner_product(const FieldState& a, const FieldState& b, const Grid& grid) {
    return inner_product(a.u1, b.u1, grid) + inner_product(a.u2, b.u2, grid);
}

double l2_norm(const FieldState& u, const Grid& grid) { return std::sqrt(inner_product(u, u, grid)); }

double energy_norm(const FieldState& u, const Fourier& fft) {
    const Grid& g = fft.grid();
    Vec d = fft.derivative(u.u1);
    return std::sqrt(inner_product(u, u, g) + inner_product(d, d, g));
}

double energy_norm(const FieldState& u, const Grid& grid) { return energy_norm(u, Fourier(grid)); }

// ---------------------------------------------------------------- matrices

Eigen::MatrixXd spectral_d1_matrix(const Grid& grid) {
    int n = grid.n;
    double ht = 2 * pi / n, sc = pi / grid.half_width;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            int d = i - j;
            double sgn = (d % 2 == 0) ? 1.0 : -1.0;
            D(i, j) = sc * 0.5 * sgn / std::tan(d * ht / 2);
        }
    return D;
}

Eigen::MatrixXd spectral_d2_matrix(const Grid& grid) {
    int n = grid.n;
    double ht = 2 * pi / n, sc = pi / grid.half_width;
    // Circulant; the diagonal closes the zero row sum exactly.
    Vec c(n, 0.0);
    for (int d = 1; d < n; ++d) {
        double sgn = (d % 2 == 0) ? 1.0 : -1.0;
        double s = std::sin(d * ht / 2);
        c[d] = sc * sc * (-0.5 * sgn / (s * s));
    }
    double off = 0.0;
    for (int d = n - 1; d >= 1; --d) off += c[d];
    c[0] = -off;
    Eigen::MatrixXd D(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D(i, j) = c[(i - j + n) % n];
    return D;
}

OperatorMatrix build_L(const Nonlinearity& nl, const Vec& q, const Grid& grid) {
    grid.validate();
    if (static_cast<int>(q.size()) != grid.n) throw NumericalError("build_L: profile size mismatch");
    OperatorMatrix op;
    op.kind = OperatorKind::L;
    op.grid = grid;
    op.M = -spectral_d2_matrix(grid);
    for (int i = 0; i < grid.n; ++i) op.M(i, i) += 1.0 - nl.df(q[i]);
    return op;
}

OperatorMatrix build_H(const Nonlinearity& nl, const Vec& q_beta, double beta, const Grid& grid) {
    int n = grid.n;
    OperatorMatrix L = build_L(nl, q_beta, grid);
    Eigen::MatrixXd D1 = spectral_d1_matrix(grid);
    OperatorMatrix op;
    op.kind = OperatorKind::H;
    op.grid = grid;
    op.beta = beta;
    op.M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    op.M.topLeftCorner(n, n) = L.M;
    op.M.topRightCorner(n, n) = -beta * D1;
    op.M.bottomLeftCorner(n, n) = beta * D1;
    op.M.bottomRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    return op;
}

OperatorMatrix build_Hcal(const Nonlinearity& nl, const Vec& q_beta, double beta, const Grid& grid) {
    int n = grid.n;
    OperatorMatrix L = build_L(nl, q_beta, grid);
    Eigen::MatrixXd D1 = spectral_d1_matrix(grid);
    OperatorMatrix op;
    op.kind = OperatorKind::Hcal;
    op.grid = grid;
    op.beta = beta;
    op.M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    op.M.topLeftCorner(n, n) = -beta * D1;
    op.M.topRightCorner(n, n) = -L.M;
    op.M.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    op.M.bottomRightCorner(n, n) = -beta * D1;
    return op;
}

OperatorMatrix build_J(const Grid& grid) {
    int n = grid.n;
    OperatorMatrix op;
    op.kind = OperatorKind::J;
    op.grid = grid;
    op.M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    op.M.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    op.M.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    return op;
}

FieldState apply_Hcal(const FieldState& z, const Nonlinearity& nl, const Vec& q_beta, double beta,
                      const Fourier& fft) {
    int n = fft.n();
    Vec d1 = fft.derivative(z.u1), d2 = fft.derivative(z.u2), dd2 = fft.second_derivative(z.u2);
    FieldState r(n, z.t);
    for (int i = 0; i < n; ++i) {
        r.u1[i] = -beta * d1[i] + dd2[i] - z.u2[i] + nl.df(q_beta[i]) * z.u2[i];
        r.u2[i] = z.u1[i] - beta * d2[i];
    }
    return r;
}

FieldState apply_H(const FieldState& v, const Nonlinearity& nl, const Vec& q_beta, double beta,
                   const Fourier& fft) {
    int n = fft.n();
    Vec dd1 = fft.second_derivative(v.u1), d1 = fft.derivative(v.u1), d2 = fft.derivative(v.u2);
    FieldState r(n, v.t);
    for (int i = 0; i < n; ++i) {
        r.u1[i] = -dd1[i] + v.u1[i] - nl.df(q_beta[i]) * v.u1[i] - beta * d2[i];
        r.u2[i] = beta * d1[i] + v.u2[i];
    }
    return r;
}

// ---------------------------------------------------------------- eigenpairs

namespace {

void fix_sign(Vec& v, int center) {
    double ref = v[center];
    if (std::fabs(ref) < 1e-8) {
        ref = 0.0;
        for (double x : v)
            if (std::fabs(x) > std::fabs(ref)) ref = x;
    }
    if (ref < 0)
        for (double& x : v) x = -x;
}

}  // namespace

EigenPair ground_eigenpair(const OperatorMatrix& L, int count) {
    if (L.kind != OperatorKind::L) throw NumericalError("ground_eigenpair expects an L operator");
    const Grid& g = L.grid;
    int n = g.n;
    count = std::clamp(count, 1, n);
    // Householder tridiagonalization, then bisection + inverse iteration on the
    // tridiagonal matrix for the lowest `count` pairs only.
    Eigen::Tridiagonalization<Eigen::MatrixXd> tri(L.M);
    Eigen::VectorXd d = tri.diagonal(), e = tri.subDiagonal();
    Vec w(n);
    std::vector<lapack_int> iblock(n), isplit(n), ifail(count);
    lapack_int m = 0, nsplit = 0;
    lapack_int info = LAPACKE_dstebz('I', 'B', n, 0.0, 0.0, 1, count, 0.0, d.data(), e.data(), &m, &nsplit,
                                     w.data(), iblock.data(), isplit.data());
    if (info != 0 || m < count) throw NumericalError(fmt::format("dstebz failed (info={})", info));
    Eigen::MatrixXd T(n, count);
    info = LAPACKE_dstein(LAPACK_COL_MAJOR, n, d.data(), e.data(), m, w.data(), iblock.data(), isplit.data(),
                          T.data(), n, ifail.data());
    if (info != 0) throw NumericalError(fmt::format("dstein failed (info={})", info));
    Eigen::MatrixXd Z = tri.matrixQ() * T;

    EigenPair ep;
    ep.grid = g;
    double scale = 1.0 / std::sqrt(g.h());
    for (int c = 0; c < count; ++c) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = Z(i, c) * scale;
        fix_sign(v, n / 2);
        ep.lowest.push_back(w[c]);
        ep.vectors.push_back(std::move(v));
    }
    if (!(ep.lowest[0] < 0.0))
        throw NumericalError("L has no negative eigenvalue (wrong profile or domain)");
    ep.lambda0 = -ep.lowest[0];
    ep.Y0 = ep.vectors[0];
    Eigen::Map<const Eigen::VectorXd> y(ep.Y0.data(), n);
    ep.residual = (L.M * y + ep.lambda0 * y).norm() / (ep.lambda0 * y.norm());
    return ep;
}

namespace {

// Newton refinement of (lambda0, Y0) with the residual accumulated in long
// double. The dense solve leaves an O(eps ||L||) residual, about 1e-12 at
// n = 2048, which later shows up as a source in the construction runs.
void refine_eigenpair(EigenPair& ep, const Vec& pot, const Grid& grid) {
    using ld = long double;
    const int n = grid.n;
    const ld L = grid.half_width, pi_l = std::numbers::pi_v<ld>;
    const ld ht = 2 * pi_l / n, sc = pi_l / L;
    // Circulant stencil of the spectral second derivative.
    // The diagonal is taken as minus the off-diagonal sum; the closed-form
    // diagonal cancels against it and leaves an O(1e-13) shift at n = 2048.
    std::vector<ld> c2(n);
    ld off = 0;
    for (int d = 1; d < n; ++d) {
        ld sgn = (d % 2 == 0) ? 1 : -1, sn = std::sin(d * ht / 2);
        c2[d] = sc * sc * (-ld(0.5) * sgn / (sn * sn));
        off += c2[d];
    }
    c2[0] = -off;
    const ld hl = grid.h();
    std::vector<ld> y(ep.Y0.begin(), ep.Y0.end());
    auto applyL = [&](const std::vector<ld>& v) {
        std::vector<ld> r(n);
        for (int i = 0; i < n; ++i) {
            ld acc = 0;
            for (int j = 0; j < n; ++j) {
                int d = i - j;
                if (d < 0) d += n;
                acc += c2[d] * v[j];
            }
            r[i] = -acc + pot[i] * v[i];
        }
        return r;
    };
    auto dotl = [&](const std::vector<ld>& a, const std::vector<ld>& b) {
        ld s = 0;
        for (int i = 0; i < n; ++i) s += a[i] * b[i];
        return s * hl;
    };
    Fourier fft(grid);
    for (int pass = 0; pass < 2; ++pass) {
        ld nrm = std::sqrt(dotl(y, y));
        for (ld& v : y) v /= nrm;
        std::vector<ld> Ly = applyL(y);
        ld lam = -dotl(y, Ly);
        Vec r(n), yd(n);
        for (int i = 0; i < n; ++i) {
            r[i] = static_cast<double>(-(Ly[i] + lam * y[i]));
            yd[i] = static_cast<double>(y[i]);
        }
        // Projected CG on (L + lam) restricted to the complement of Y0.
        auto project = [&](Vec& v) {
            double a = inner_product(v, yd, grid);
            for (int i = 0; i < n; ++i) v[i] -= a * yd[i];
        };
        auto apply = [&](const Vec& v) {
            Vec d2 = fft.second_derivative(v), out(n);
            for (int i = 0; i < n; ++i) out[i] = -d2[i] + pot[i] * v[i] + static_cast<double>(lam) * v[i];
            project(out);
            return out;
        };
        project(r);
        Vec x(n, 0.0), res = r, p = r;
        double rr = inner_product(res, res, grid), r0 = rr;
        for (int it = 0; it < 2000 && rr > 1e-28 * r0; ++it) {
            Vec Ap = apply(p);
            double alpha = rr / inner_product(p, Ap, grid);
            for (int i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                res[i] -= alpha * Ap[i];
            }
            double rr_new = inner_product(res, res, grid);
            for (int i = 0; i < n; ++i) p[i] = res[i] + (rr_new / rr) * p[i];
            rr = rr_new;
        }
        for (int i = 0; i < n; ++i) y[i] += x[i];
    }
    ld nrm = std::sqrt(dotl(y, y));
    for (ld& v : y) v /= nrm;
    std::vector<ld> Ly = applyL(y);
    ld lam = -dotl(y, Ly);
    ld res = 0;
    for (int i = 0; i < n; ++i) res += (Ly[i] + lam * y[i]) * (Ly[i] + lam * y[i]);
    for (int i = 0; i < n; ++i) ep.Y0[i] = static_cast<double>(y[i]);
    ep.lambda0 = static_cast<double>(lam);
    ep.residual = static_cast<double>(std::sqrt(res * hl) / lam);
    if (!ep.vectors.empty()) ep.vectors[0] = ep.Y0;
    if (!ep.lowest.empty()) ep.lowest[0] = -ep.lambda0;
}

}  // namespace

EigenPair ground_eigenpair(const Nonlinearity& nl, const GroundState& gs, const Grid& grid) {
    if (grid.n <= 4096) {
        Vec q = ground_state(gs, grid), pot(grid.n);
        for (int i = 0; i < grid.n; ++i) pot[i] = 1.0 - nl.df(q[i]);
        EigenPair ep = ground_eigenpair(build_L(nl, q, grid));
        refine_eigenpair(ep, pot, grid);
        return ep;
    }

    Grid coarse = grid;
    while (coarse.n > 4096) coarse.n /= 2;
    EigenPair c = ground_eigenpair(build_L(nl, ground_state(gs, coarse), coarse));

    // Spectral interpolation onto the fine grid by zero padding.
    Fourier fc(coarse), ff(grid);
    std::vector<cplx> sc(fc.nmodes()), sf(ff.nmodes(), 0.0);
    fc.forward(c.Y0.data(), sc.data());
    double ratio = static_cast<double>(grid.n) / coarse.n;
    for (int m = 0; m < fc.nmodes(); ++m) sf[m] = sc[m] * ratio;
    sf[fc.nmodes() - 1] *= 0.5;
    int n = grid.n;
    Vec y(n);
    ff.inverse(sf.data(), y.data());

    Vec q = ground_state(gs, grid), pot(n);
    for (int i = 0; i < n; ++i) pot[i] = 1.0 - nl.df(q[i]);
    auto applyL = [&](const Vec& v) {
        Vec d2 = ff.second_derivative(v), r(n);
        for (int i = 0; i < n; ++i) r[i] = -d2[i] + pot[i] * v[i];
        return r;
    };
    const double shift = -c.lambda0 - 0.25;
    auto precond = [&](const Vec& r) {
        std::vector<cplx> s(ff.nmodes());
        ff.forward(r.data(), s.data());
        for (int m = 0; m < ff.nmodes(); ++m) s[m] /= ff.k()[m] * ff.k()[m] + 1.0 - shift;
        Vec out(n);
        ff.inverse(s.data(), out.data());
        return out;
    };
    auto dot = [&](const Vec& a, const Vec& b) { return inner_product(a, b, grid); };
    auto normalize = [&](Vec& v) {
        double s = 1.0 / std::sqrt(dot(v, v));
        for (double& x : v) x *= s;
    };
    normalize(y);
    double lam = c.lambda0;
    for (int outer = 0; outer < 8; ++outer) {
        // Solve (L - shift) x = y by preconditioned CG.
        Vec x(n, 0.0), r = y, z = precond(r), p = z;
        double rz = dot(r, z), r0 = std::sqrt(dot(r, r));
        for (int it = 0; it < 500 && std::sqrt(dot(r, r)) > 1e-14 * r0; ++it) {
            Vec Ap = applyL(p);
            for (int i = 0; i < n; ++i) Ap[i] -= shift * p[i];
            double alpha = rz / dot(p, Ap);
            for (int i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
            }
            z = precond(r);
            double rz_new = dot(r, z);
            for (int i = 0; i < n; ++i) p[i] = z[i] + (rz_new / rz) * p[i];
            rz = rz_new;
        }
        y = x;
        normalize(y);
        Vec Ly = applyL(y);
        lam = -dot(y, Ly);
    }
    fix_sign(y, n / 2);
    EigenPair ep;
    ep.grid = grid;
    ep.lambda0 = lam;
    ep.Y0 = y;
    ep.lowest = {-lam};
    ep.vectors = {y};
    Vec Ly = applyL(y);
    double res = 0.0;
    for (int i = 0; i < n; ++i) res += (Ly[i] + lam * y[i]) * (Ly[i] + lam * y[i]);
    ep.residual = std::sqrt(res * grid.h()) / lam;
    refine_eigenpair(ep, pot, grid);
    return ep;
}

// ---------------------------------------------------------------- GroundMode

GroundMode::GroundMode(const EigenPair& ep, const GroundState& gs, double patch_level)
    : lambda0_(ep.lambda0), eg_(ep.grid) {
    int n = eg_.n;
    Fourier f(eg_);
    coef_.resize(f.nmodes());
    f.forward(ep.Y0.data(), coef_.data());
    for (auto& c : coef_) c /= n;

    // Patch point: first sample right of the center where Y0 falls below the level.
    double ymax = *std::max_element(ep.Y0.begin(), ep.Y0.end());
    int i = n / 2;
    while (i + 1 < n && ep.Y0[i] >= patch_level * ymax) ++i;
    y_patch_ = std::min(eg_.x(i), 0.75 * eg_.half_width);

    // Riccati w' = V - w^2 with V = 1 + lambda0 - f'(Q), integrated inward from far out.
    const Nonlinearity& nl = gs.nonlinearity();
    auto V = [&](double y) { return 1.0 + lambda0_ - nl.df(gs.Q(y)); };
    tail_h_ = 5e-4;
    tail_far_ = y_patch_ + 40.0;
    int steps = static_cast<int>(std::ceil((tail_far_ - y_patch_) / tail_h_));
    tail_h_ = (tail_far_ - y_patch_) / steps;
    ell_.assign(steps + 1, 0.0);
    w_.assign(steps + 1, 0.0);
    // Long double accumulation: ell sums ~1e5 increments of size 1e-3.
    using ld = long double;
    auto Vl = [&](ld y) { return static_cast<ld>(V(static_cast<double>(y))); };
    ld w = -std::sqrt(Vl(tail_far_)), ell = 0.0, h = -static_cast<ld>(tail_h_);
    w_[steps] = static_cast<double>(w);
    ell_[steps] = 0.0;
    for (int s = steps; s > 0; --s) {
        ld y = y_patch_ + static_cast<ld>(s) * tail_h_;
        ld k1w = Vl(y) - w * w, k1l = w;
        ld w2 = w + 0.5L * h * k1w;
        ld k2w = Vl(y + 0.5L * h) - w2 * w2, k2l = w2;
        ld w3 = w + 0.5L * h * k2w;
        ld k3w = Vl(y + 0.5L * h) - w3 * w3, k3l = w3;
        ld w4 = w + h * k3w;
        ld k4w = Vl(y + h) - w4 * w4, k4l = w4;
        w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
        ell += h / 6 * (k1l + 2 * k2l + 2 * k3l + k4l);
        w_[s - 1] = static_cast<double>(w);
        ell_[s - 1] = static_cast<double>(ell);
    }
    double v0, d0;
    trig_eval(y_patch_, &v0, &d0);
    dw_.resize(w_.size());
    for (size_t s = 0; s < w_.size(); ++s) dw_[s] = V(y_patch_ + s * tail_h_) - w_[s] * w_[s];
    double shift = std::log(v0) - ell_[0];
    for (double& e : ell_) e += shift;
    tail_rate_ = -std::sqrt(1.0 + lambda0_);
}

void GroundMode::trig_eval(double y, double* v, double* d) const {
    // Long double recurrence: the rotation z *= step drifts by O(m eps) in double.
    using ld = long double;
    using cld = std::complex<ld>;
    int nm = static_cast<int>(coef_.size());
    const ld L = eg_.half_width, th = std::numbers::pi_v<ld> * (y + L) / L;
    const cld step = std::polar(ld(1), th);
    cld z = 1;
    ld val = coef_[0].real(), der = 0;
    for (int m = 1; m < nm; ++m) {
        z = (m % 256 == 0) ? std::polar(ld(1), m * th) : z * step;
        ld km = m * std::numbers::pi_v<ld> / L;
        cld cz = cld(coef_[m].real(), coef_[m].imag()) * z;
        if (m == nm - 1) {
            val += coef_[m].real() * std::cos(m * th);
            der += -km * coef_[m].real() * std::sin(m * th);
        } else {
            val += 2 * cz.real();
            der += -2 * km * cz.imag();
        }
    }
    *v = static_cast<double>(val);
    *d = static_cast<double>(der);
}

void GroundMode::tail_eval(double ay, double* ell, double* w) const {
    if (ay >= tail_far_) {
        *w = w_.back();
        *ell = ell_.back() + w_.back() * (ay - tail_far_);
        return;
    }
    double s = (ay - y_patch_) / tail_h_;
    int i = std::clamp(static_cast<int>(s), 0, static_cast<int>(ell_.size()) - 2);
    double u = s - i, h = tail_h_;
    double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    *ell = h00 * ell_[i] + h10 * h * w_[i] + h01 * ell_[i + 1] + h11 * h * w_[i + 1];
    *w = h00 * w_[i] + h10 * h * dw_[i] + h01 * w_[i + 1] + h11 * h * dw_[i + 1];
}

void GroundMode::weighted(double y, double a, double* value, double* deriv) const {
    double ay = std::fabs(y);
    if (ay <= y_patch_) {
        double v, d;
        trig_eval(y, &v, &d);
        double e = std::exp(a * y);
        *value = e * v;
        *deriv = e * (a * v + d);
        return;
    }
    double ell, w;
    tail_eval(ay, &ell, &w);
    double sgn = y < 0 ? -1.0 : 1.0;
    double ex = a * y + ell;
    double val = ex < -700 ? 0.0 : std::exp(ex);
    *value = val;
    *deriv = val * (a + sgn * w);
}

double GroundMode::value(double y) const {
    double v, d;
    weighted(y, 0.0, &v, &d);
    return v;
}

// ---------------------------------------------------------------- bundle


const FieldState& SpectralBundle::centered(Profile p) const {
    switch (p) {
        case Profile::Zp: return Zp;
        case Profile::Zm: return Zm;
        case Profile::Yp: return Yp;
        case Profile::Ym: return Ym;
        case Profile::Z0: return Z0;
        case Profile::dR: return dR;
        case Profile::R: return R;
    }
    return R;
}

FieldState SpectralBundle::at(Profile p, double center, const Fourier& fft) const {
    return fft.shift(centered(p), center);
}

SpectralBundle boosted_pairs(const GroundMode& mode, const GroundState& gs, double beta, const Grid& grid,
                             const BundleOptions& opts) {
    SolitonSpec{beta, 0.0}.validate();
    grid.validate();
    SpectralBundle b;
    b.grid = grid;
    b.beta = beta;
    b.gamma = 1.0 / std::sqrt(1.0 - beta * beta);
    b.lambda0 = mode.lambda0();
    b.e = std::sqrt(b.lambda0) / b.gamma;
    const double g = b.gamma, a = std::sqrt(b.lambda0) * beta;
    int n = grid.n;
    for (FieldState* f : {&b.Zp, &b.Zm, &b.Z0, &b.dR, &b.R}) *f = FieldState(n);
    b.Qb.resize(n);
    for (int i = 0; i < n; ++i) {
        double y = g * grid.x(i);
        double w, dw;
        mode.weighted(y, a, &w, &dw);
        b.Zp.u2[i] = w;
        b.Zp.u1[i] = b.e * w + beta * g * dw;
        mode.weighted(y, -a, &w, &dw);
        b.Zm.u2[i] = w;
        b.Zm.u1[i] = -b.e * w + beta * g * dw;
        double q = gs.Q(y), dq = gs.dQ(y), d2q = gs.d2Q(y);
        b.Qb[i] = q;
        b.Z0.u1[i] = beta * g * g * d2q;
        b.Z0.u2[i] = g * dq;
        b.R.u1[i] = q;
        b.R.u2[i] = -beta * g * dq;
    }
    b.dR = apply_J(b.Z0);
    Fourier fft(grid);
    // Pointwise evaluation leaves a flat rounding plateau in the spectrum that
    // derivatives amplify by k^2; the eigenmodes are kept band-limited.
    for (Vec* v : {&b.Zp.u1, &b.Zp.u2, &b.Zm.u1, &b.Zm.u2}) strip_plateau(*v, fft);

    double pair = inner_product(apply_J(b.Zp), b.Zm, grid);
    if (!(std::fabs(pair) > 1e-12)) throw NumericalError("normalization system singular: <JZ+, Z-> ~ 0");
    double k0 = 1.0 / pair;
    FieldState yp = k0 * apply_J(b.Zp), ym = (-k0) * apply_J(b.Zm);
    double s2 = std::sqrt(l2_norm(yp, grid) * l2_norm(ym, grid) / (l2_norm(b.Zp, grid) * l2_norm(b.Zm, grid)));
    b.scale = std::sqrt(s2);
    b.Zp = b.scale * b.Zp;
    b.Zm = b.scale * b.Zm;
    b.kappa = k0 / s2;
    b.Yp = b.kappa * apply_J(b.Zp);
    b.Ym = (-b.kappa) * apply_J(b.Zm);

    FieldState jz0 = apply_J(b.Z0);
    double jj = inner_product(jz0, jz0, grid);
    b.nu = -inner_product(jz0, b.Yp, grid) / jj;
    b.Yp_ko = b.Yp;
    axpy(b.nu, jz0, b.Yp_ko);
    b.Ym_ko = b.Ym;
    axpy(-inner_product(jz0, b.Ym, grid) / jj, jz0, b.Ym_ko);

    const Nonlinearity& nl = gs.nonlinearity();
    auto rel_res = [&](const FieldState& z, double ev) {
        FieldState r = apply_Hcal(z, nl, b.Qb, beta, fft);
        axpy(-ev, z, r);
        return l2_norm(r, grid) / l2_norm(z, grid);
    };
    b.res_plus = rel_res(b.Zp, b.e);
    b.res_minus = rel_res(b.Zm, -b.e);
    b.res_kernel = rel_res(b.Z0, 0.0);
    double worst = std::max({b.res_plus, b.res_minus, b.res_kernel});
    if (!(worst <= opts.residual_tol))
        throw NumericalError(fmt::format(
            "eigen-residual {:.3e} above tolerance {:.1e} (beta={}, n={}, L={}); refine the grid", worst,
            opts.residual_tol, beta, grid.n, grid.half_width));
    double orth = std::max({std::fabs(inner_product(b.Yp, b.Zp, grid)), std::fabs(inner_product(b.Ym, b.Zm, grid)),
                            std::fabs(inner_product(b.Yp, b.Zm, grid) - 1.0),
                            std::fabs(inner_product(b.Ym, b.Zp, grid) - 1.0)});
    if (!(orth <= opts.orth_tol))
        throw NumericalError(fmt::format("pairing defect {:.3e} above tolerance", orth));
    return b;
}

Eigen::MatrixXd energy_gram(const Grid& grid) {
    int n = grid.n;
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    N.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n) - spectral_d2_matrix(grid);
    N.bottomRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    return N;
}

double coercivity_mu(const SpectralBundle& bundle, const OperatorMatrix& H) {
    if (H.kind != OperatorKind::H || !(H.grid == bundle.grid))
        throw NumericalError("coercivity_mu: H must be an H_beta matrix on the bundle grid");
    const Grid& g = bundle.grid;
    int n = g.n, N2 = 2 * n;
    Eigen::MatrixXd C(N2, 3);
    FieldState jz0 = apply_J(bundle.Z0);
    const FieldState* cs[3] = {&bundle.Zp, &bundle.Zm, &jz0};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < n; ++i) {
            C(i, c) = cs[c]->u1[i];
            C(n + i, c) = cs[c]->u2[i];
        }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
    Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(N2, N2);
    Eigen::MatrixXd P = Qfull.rightCols(N2 - 3);
    Eigen::MatrixXd Hs = 0.5 * (H.M + H.M.transpose());
    Eigen::MatrixXd A = P.transpose() * Hs * P;
    Eigen::MatrixXd B = P.transpose() * energy_gram(g) * P;
    A = 0.5 * (A + A.transpose());
    B = 0.5 * (B + B.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("coercivity eigensolve failed");
    double mu = es.eigenvalues()(0);
    if (!(mu > 0.0))
        throw NumericalError(fmt::format("projected operator not positive (min {:.3e}); grid too coarse?", mu));
    return mu;
}

}  // namespace nlkg
