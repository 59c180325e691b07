#include "nlkg/deviation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace nlkg {

ShiftedProfile::ShiftedProfile(const FieldState& centered, const Fourier& fft, int cutoff) {
    s1_.resize(fft.nmodes());
    s2_.resize(fft.nmodes());
    fft.forward(centered.u1.data(), s1_.data());
    fft.forward(centered.u2.data(), s2_.data());
    if (cutoff >= 0)
        for (int m = cutoff + 1; m < fft.nmodes(); ++m) s1_[m] = s2_[m] = 0.0;
}

namespace {

using ld = long double;

// Samples of d^order/dx^order of the real trigonometric polynomial with
// half-spectrum s (FFTW r2c layout), summed directly in long double.
std::vector<ld> synthesize(const std::vector<cplx>& s, int order, const Grid& grid) {
    const int n = grid.n, nm = static_cast<int>(s.size());
    std::vector<ld> c(n), sn(n);
    for (int q = 0; q < n; ++q) {
        ld a = 2 * std::numbers::pi_v<ld> * q / n;
        c[q] = std::cos(a);
        sn[q] = std::sin(a);
    }
    const ld dk = std::numbers::pi_v<ld> / grid.half_width;
    std::vector<ld> out(n, 0.0L);
    for (int m = 0; m < nm; ++m) {
        if (s[m] == cplx(0.0)) continue;
        const bool nyq = (m == nm - 1);
        if (nyq && order % 2 == 1) continue;
        ld re = s[m].real(), im = s[m].imag();
        ld k = dk * m, w = (m == 0 || nyq) ? 1 : 2;
        // (i k)^order applied to re + i im
        for (int r = 0; r < order; ++r) {
            ld t = re;
            re = -k * im;
            im = k * t;
        }
        if (nyq) im = 0;
        for (int j = 0; j < n; ++j) {
            int q = static_cast<int>((static_cast<long long>(m) * j) % n);
            out[j] += w * (re * c[q] - im * sn[q]);
        }
    }
    for (auto& v : out) v /= n;
    return out;
}

}  // namespace

FieldState ShiftedProfile::at(double center, const Fourier& fft) const {
    int nm = fft.nmodes();
    std::vector<cplx> a(nm), b(nm);
    for (int m = 0; m < nm - 1; ++m) {
        cplx ph = std::polar(1.0, -fft.k()[m] * center);
        a[m] = s1_[m] * ph;
        b[m] = s2_[m] * ph;
    }
    double c = std::cos(fft.k()[nm - 1] * center);
    a[nm - 1] = s1_[nm - 1] * c;
    b[nm - 1] = s2_[nm - 1] * c;
    FieldState out(fft.n());
    fft.inverse(a.data(), out.u1.data());
    fft.inverse(b.data(), out.u2.data());
    return out;
}

TimeGrid::TimeGrid(double S_, double t_end_, double dt_max) : S(S_), t_end(t_end_) {
    if (!(dt_max > 0.0)) throw ConfigError("time step must be positive");
    double span = S - t_end;
    if (span < 0.0) throw ConfigError("backward time grid needs S >= t_end");
    K = span == 0.0 ? 0 : std::max(1, static_cast<int>(std::ceil(span / dt_max - 1e-9)));
    h = K == 0 ? 0.0 : span / K;
}

// ---------------------------------------------------------------- model

DeviationModel::DeviationModel(const Grid& grid, const GroundState& gs, std::vector<SolitonSpec> specs,
                               std::vector<std::shared_ptr<const SpectralBundle>> bundles)
    : grid_(grid), gs_(gs), specs_(std::move(specs)), bundles_(std::move(bundles)), fft_(grid) {
    if (specs_.size() != bundles_.size() || specs_.empty())
        throw ConfigError("deviation model needs one bundle per soliton");
    const Nonlinearity& nl = gs_.nonlinearity();
    for (size_t k = 0; k < specs_.size(); ++k) {
        const SpectralBundle& b = *bundles_[k];
        if (!(b.grid == grid_)) throw ConfigError("bundle grid does not match the simulation grid");
        if (std::fabs(b.beta - specs_[k].beta) > 1e-14) throw ConfigError("bundle velocity does not match spec");
        // The mode term is defined by the band-limited spectrum of Y+. Its
        // defect is evaluated from that spectrum in extended precision, so the
        // V source sees the genuine eigen-defect rather than sampling noise.
        const FieldState& Y = b.Yp;
        std::vector<cplx> s1(fft_.nmodes()), s2(fft_.nmodes());
        fft_.forward(Y.u1.data(), s1.data());
        fft_.forward(Y.u2.data(), s2.data());
        int cut = std::max(plateau_cutoff(s1), plateau_cutoff(s2));
        for (int m = cut + 1; m < fft_.nmodes(); ++m) s1[m] = s2[m] = 0.0;
        auto y1 = synthesize(s1, 0, grid_), y2 = synthesize(s2, 0, grid_);
        auto d1 = synthesize(s1, 1, grid_), d2 = synthesize(s2, 1, grid_), dd1 = synthesize(s1, 2, grid_);
        FieldState def(grid_.n);
        const ld e = b.e, be = b.beta;
        for (int i = 0; i < grid_.n; ++i) {
            def.u1[i] = static_cast<double>(-e * y1[i] - be * d1[i] - y2[i]);
            def.u2[i] = static_cast<double>(-e * y2[i] - be * d2[i] - dd1[i] + y1[i] -
                                            static_cast<ld>(nl.df(b.Qb[i])) * y1[i]);
        }
        mode_defect_ = std::max(mode_defect_, l2_norm(def, grid_) / l2_norm(Y, grid_));
        yp_.emplace_back(Y, fft_, cut);
        defect_.emplace_back(def, fft_);
        zm_.emplace_back(b.Zm, fft_);
        zp_.emplace_back(b.Zp, fft_);
    }
}

FieldState DeviationModel::profile(int k, SpectralBundle::Profile p, double t) const {
    double c = specs_[k].center(t);
    using P = SpectralBundle::Profile;
    switch (p) {
        case P::Yp: return yp_[k].at(c, fft_);
        case P::Zm: return zm_[k].at(c, fft_);
        case P::Zp: return zp_[k].at(c, fft_);
        case P::R: return boost(gs_, specs_[k], t, grid_);
        default: return bundles_[k]->at(p, c, fft_);
    }
}

FieldState DeviationModel::solitons(double t) const {
    FieldState s(grid_.n, t);
    for (const auto& sp : specs_) {
        FieldState r = boost(gs_, sp, t, grid_);
        axpy(1.0, r, s);
    }
    return s;
}

FieldState DeviationModel::modes(const Vec& c, double t) const {
    FieldState d(grid_.n, t);
    for (int k = 0; k < size(); ++k) {
        if (c[k] == 0.0) continue;
        double amp = c[k] * std::exp(-rate(k) * t);
        axpy(amp, yp_[k].at(specs_[k].center(t), fft_), d);
    }
    return d;
}

FieldState DeviationModel::state(const Vec& c, const FieldState& V) const {
    FieldState u = solitons(V.t);
    axpy(1.0, modes(c, V.t), u);
    axpy(1.0, V, u);
    u.t = V.t;
    return u;
}

void DeviationModel::fill_frame(double t, Frame& fr, bool with_projectors) const {
    const Nonlinearity& nl = gs_.nonlinearity();
    int n = grid_.n, N = size();
    fr.t = t;
    fr.R1.resize(N);
    fr.S1.assign(n, 0.0);
    fr.inter.assign(n, 0.0);
    for (int k = 0; k < N; ++k) {
        const double g = specs_[k].gamma(), c = specs_[k].center(t);
        Vec& r = fr.R1[k];
        r.resize(n);
        for (int i = 0; i < n; ++i) r[i] = gs_.Q(g * wrap_periodic(grid_.x(i) - c, grid_.half_width));
        if (k == 0) {
            fr.S1 = r;
        } else {
            for (int i = 0; i < n; ++i) {
                fr.inter[i] += nl.diff(fr.S1[i], r[i]) - nl.f(r[i]);
                fr.S1[i] += r[i];
            }
        }
    }
    fr.Yp.resize(N);
    fr.defect.resize(N);
    for (int k = 0; k < N; ++k) {
        double c = specs_[k].center(t);
        fr.Yp[k] = yp_[k].at(c, fft_);
        fr.defect[k] = defect_[k].at(c, fft_);
    }
    if (with_projectors) {
        fr.Zm.resize(N);
        fr.Zp.resize(N);
        for (int k = 0; k < N; ++k) {
            double c = specs_[k].center(t);
            fr.Zm[k] = zm_[k].at(c, fft_);
            fr.Zp[k] = zp_[k].at(c, fft_);
        }
    }
}

void DeviationModel::source(const Frame& fr, const Vec& c, const FieldState& V, FieldState& out) const {
    const Nonlinearity& nl = gs_.nonlinearity();
    int n = grid_.n, N = size();
    out = FieldState(n, fr.t);
    Vec amp(N);
    for (int k = 0; k < N; ++k) amp[k] = c[k] == 0.0 ? 0.0 : c[k] * std::exp(-rate(k) * fr.t);
    Vec D1(n, 0.0);
    for (int k = 0; k < N; ++k) {
        if (amp[k] == 0.0) continue;
        for (int i = 0; i < n; ++i) {
            D1[i] += amp[k] * fr.Yp[k].u1[i];
            out.u1[i] -= amp[k] * fr.defect[k].u1[i];
            out.u2[i] -= amp[k] * fr.defect[k].u2[i];
        }
    }
    for (int i = 0; i < n; ++i) {
        double s = fr.S1[i], v = V.u1[i];
        double g = nl.incr(s, D1[i] + v) + nl.df(s) * v + fr.inter[i];
        if (N > 1) {
            for (int k = 0; k < N; ++k) {
                if (amp[k] == 0.0) continue;
                double others = 0.0;
                for (int l = 0; l < N; ++l)
                    if (l != k) others += fr.R1[l][i];
                g += nl.ddiff(fr.R1[k][i], others) * amp[k] * fr.Yp[k].u1[i];
            }
        }
        out.u2[i] += g;
    }
}

FieldState FamilyTrajectory::difference(const FamilyTrajectory& other, size_t s, const DeviationModel& model) const {
    if (std::fabs(times[s] - other.times[s]) > 1e-9 * std::max(1.0, std::fabs(times[s])))
        throw NumericalError("family trajectories sampled at different times");
    Vec dc(c[s].size());
    for (size_t k = 0; k < dc.size(); ++k) dc[k] = c[s][k] - other.c[s][k];
    FieldState d = model.modes(dc, times[s]);
    axpy(1.0, V[s], d);
    axpy(-1.0, other.V[s], d);
    d.t = times[s];
    return d;
}

// ---------------------------------------------------------------- integrator

namespace {

SolverConfig strang_config() {
    SolverConfig cfg;
    cfg.scheme = Scheme::StrangSpectral;
    cfg.boundary = Boundary::Periodic;
    return cfg;
}

}  // namespace

DeviationIntegrator::DeviationIntegrator(const DeviationModel& model, const Nonlinearity& nl, const Grid& grid)
    : model_(model), lin_(grid, nl, strang_config()) {}

FieldState DeviationIntegrator::run(Vec& c, const TimeGrid& tg, const FieldState& V_S, const NodeObserver& obs,
                                    bool with_projectors, bool absorb) const {
    const int N = model_.size();
    if (static_cast<int>(c.size()) != N) throw NumericalError("coefficient vector size mismatch");
    with_projectors = with_projectors || absorb;
    FieldState V = V_S;
    V.t = tg.S;
    const Grid& grid = model_.grid();
    auto absorb_modes = [&](const Frame& fr) {
        Eigen::MatrixXd psi(N, N);
        Eigen::VectorXd p(N);
        for (int k = 0; k < N; ++k) {
            p(k) = inner_product(V, fr.Zm[k], grid);
            for (int l = 0; l < N; ++l) psi(k, l) = inner_product(fr.Yp[l], fr.Zm[k], grid);
        }
        Eigen::VectorXd q = psi.partialPivLu().solve(p);
        for (int l = 0; l < N; ++l) {
            axpy(-q(l), fr.Yp[l], V);
            c[l] += q(l) * std::exp(model_.rate(l) * fr.t);
        }
    };
    Frame fr;
    model_.fill_frame(tg.t(0), fr, with_projectors);
    if (absorb) absorb_modes(fr);
    if (obs && !obs(0, fr, V, c)) return V;
    FieldState src;
    for (int m = 0; m < tg.K; ++m) {
        double h = tg.t(m + 1) - tg.t(m);
        model_.source(fr, c, V, src);
        axpy(0.5 * h, src, V);
        lin_.linear_step(V, h);
        model_.fill_frame(tg.t(m + 1), fr, with_projectors);
        model_.source(fr, c, V, src);
        axpy(0.5 * h, src, V);
        V.t = tg.t(m + 1);
        if (!V.finite()) throw NumericalError(fmt::format("deviation blew up at t = {:.6g}", V.t));
        if (absorb) absorb_modes(fr);
        if (obs && !obs(m + 1, fr, V, c)) break;
    }
    return V;
}

}  // namespace nlkg
