#include "nlkg/profiles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace nlkg {

namespace {

constexpr double kDenormalFloor = 1e-300;

double clamp_tiny(double v) { return std::fabs(v) < kDenormalFloor ? 0.0 : v; }

// (1 + r)^p - 1 - p r for |r| <= 1/2, without the cancellation of the naive form.
double binomial_tail(double p, double r) {
    if (std::fabs(r) < 0.1) {
        double coef = p * (p - 1.0) / 2.0;
        double rk = r * r;
        double sum = 0.0;
        for (int k = 2; k < 60; ++k) {
            double term = coef * rk;
            sum += term;
            if (std::fabs(term) <= 1e-18 * std::fabs(sum) || term == 0.0) break;
            coef *= (p - k) / (k + 1.0);
            rk *= r;
        }
        return sum;
    }
    return std::expm1(p * std::log1p(r)) - p * r;
}

}  // namespace

Vec Grid::points() const {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = this->x(i);
    return x;
}

void Grid::validate() const {
    if (!(half_width > 0.0)) throw ConfigError("grid.half_width must be positive");
    if (n < 16) throw ConfigError("grid.n must be at least 16");
    if (n % 2 != 0) throw ConfigError("grid.n must be even");
}

double wrap_periodic(double xi, double half_width) {
    double period = 2.0 * half_width;
    double r = std::fmod(xi + half_width, period);
    if (r < 0) r += period;
    return r - half_width;
}

// ---------------------------------------------------------------- Nonlinearity

Nonlinearity Nonlinearity::power(double p, double coeff) {
    Nonlinearity nl;
    nl.p_ = p;
    nl.coeff_ = coeff;
    nl.validate();
    return nl;
}

Nonlinearity Nonlinearity::custom(Fn f, Fn df, Fn d2f) {
    if (!f || !df || !d2f) throw ConfigError("custom nonlinearity needs f, f' and f''");
    Nonlinearity nl;
    nl.f_ = std::move(f);
    nl.df_ = std::move(df);
    nl.d2f_ = std::move(d2f);
    nl.p_ = 0.0;
    nl.coeff_ = 0.0;
    nl.validate();
    return nl;
}

void Nonlinearity::validate() const {
    if (is_power()) {
        if (!(p_ > 2.0)) throw ConfigError(fmt::format("nonlinearity.p must exceed 2 (got {})", p_));
        if (!(coeff_ > 0.0))
            throw ConfigError(fmt::format("nonlinearity.coeff must be positive (got {})", coeff_));
        return;
    }
    for (double u : {1e-3, 0.1, 0.5, 1.0, 1.7, 3.0}) {
        double a = f_(u), b = f_(-u);
        if (std::fabs(a + b) > 1e-12 * (std::fabs(a) + 1e-300))
            throw ConfigError(fmt::format("custom nonlinearity is not odd at u={}", u));
    }
    if (std::fabs(df_(0.0)) > 1e-14) throw ConfigError("custom nonlinearity needs f'(0) = 0");
}

double Nonlinearity::f(double u) const {
    if (!is_power()) return f_(u);
    if (p_ == 3.0) return coeff_ * u * u * u;
    return coeff_ * std::pow(std::fabs(u), p_ - 1.0) * u;
}

double Nonlinearity::df(double u) const {
    if (!is_power()) return df_(u);
    if (p_ == 3.0) return 3.0 * coeff_ * u * u;
    return coeff_ * p_ * std::pow(std::fabs(u), p_ - 1.0);
}

double Nonlinearity::d2f(double u) const {
    if (!is_power()) return d2f_(u);
    if (p_ == 3.0) return 6.0 * coeff_ * u;
    if (u == 0.0) return 0.0;
    return coeff_ * p_ * (p_ - 1.0) * std::copysign(std::pow(std::fabs(u), p_ - 2.0), u);
}

double Nonlinearity::F(double u) const {
    if (is_power()) return coeff_ * std::pow(std::fabs(u), p_ + 1.0) / (p_ + 1.0);
    // 8-point Gauss-Legendre on [0, u]; f is smooth so this is plenty.
    static const double xg[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                 0.9602898564975363};
    static const double wg[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                 0.1012285362903763};
    double half = 0.5 * u, s = 0.0;
    for (int k = 0; k < 4; ++k) s += wg[k] * (f_(half * (1 + xg[k])) + f_(half * (1 - xg[k])));
    return s * half;
}

double Nonlinearity::diff(double s, double d) const {
    if (!is_power()) return f_(s + d) - f_(s);
    if (p_ == 3.0) return coeff_ * d * (3.0 * s * s + 3.0 * s * d + d * d);
    if (s != 0.0 && std::fabs(d) <= 0.5 * std::fabs(s))
        return f(s) * std::expm1(p_ * std::log1p(d / s));
    return f(s + d) - f(s);
}

double Nonlinearity::ddiff(double s, double d) const {
    if (!is_power()) return df_(s + d) - df_(s);
    if (p_ == 3.0) return 3.0 * coeff_ * d * (2.0 * s + d);
    if (s != 0.0 && std::fabs(d) <= 0.5 * std::fabs(s))
        return df(s) * std::expm1((p_ - 1.0) * std::log1p(d / s));
    return df(s + d) - df(s);
}

double Nonlinearity::incr(double s, double d) const {
    if (!is_power()) return f_(s + d) - f_(s) - df_(s) * d;
    if (p_ == 3.0) return coeff_ * d * d * (3.0 * s + d);
    if (s != 0.0 && std::fabs(d) <= 0.5 * std::fabs(s)) return f(s) * binomial_tail(p_, d / s);
    return f(s + d) - f(s) - df(s) * d;
}

// ---------------------------------------------------------------- SolitonSpec

double SolitonSpec::gamma() const { return 1.0 / std::sqrt(1.0 - beta * beta); }

void SolitonSpec::validate() const {
    if (!(std::fabs(beta) < 1.0)) throw ConfigError(fmt::format("|beta| must be < 1 (got {})", beta));
    if (!std::isfinite(x0)) throw ConfigError("soliton x0 must be finite");
}

bool FieldState::finite() const {
    for (double v : u1)
        if (!std::isfinite(v)) return false;
    for (double v : u2)
        if (!std::isfinite(v)) return false;
    return true;
}

FieldState operator+(const FieldState& a, const FieldState& b) {
    FieldState r = a;
    axpy(1.0, b, r);
    return r;
}

FieldState operator-(const FieldState& a, const FieldState& b) {
    FieldState r = a;
    axpy(-1.0, b, r);
    return r;
}

FieldState operator*(double s, const FieldState& a) {
    FieldState r = a;
    for (auto& v : r.u1) v *= s;
    for (auto& v : r.u2) v *= s;
    return r;
}

void axpy(double a, const FieldState& x, FieldState& y) {
    if (x.size() != y.size()) throw NumericalError("axpy: size mismatch");
    for (int i = 0; i < y.size(); ++i) {
        y.u1[i] += a * x.u1[i];
        y.u2[i] += a * x.u2[i];
    }
}

FieldState apply_J(const FieldState& a) {
    FieldState r(a.size(), a.t);
    for (int i = 0; i < a.size(); ++i) {
        r.u1[i] = a.u2[i];
        r.u2[i] = -a.u1[i];
    }
    return r;
}

// ---------------------------------------------------------------- GroundState

GroundState::GroundState(const Nonlinearity& nl) : nl_(nl) {
    nl_.validate();
    if (nl_.is_power()) {
        double p = nl_.p();
        amp_ = std::pow((p + 1.0) / (2.0 * nl_.coeff()), 1.0 / (p - 1.0));
        c_ = (p - 1.0) / 2.0;
        m_ = 2.0 / (p - 1.0);
        tail_rate_ = c_ * m_;
    } else {
        shoot();
    }
}

void GroundState::shoot() {
    // Q'' = Q - f(Q), Q(0) = a, Q'(0) = 0. Overshoot (Q < 0) means a too large;
    // turning back up (Q' > 0) means a too small.
    const double h = 1e-3, xmax = 60.0;
    auto rhs = [&](double q) { return q - nl_.f(q); };
    auto classify = [&](double a) {
        double q = a, v = 0.0;
        for (double x = 0.0; x < xmax; x += h) {
            double k1q = v, k1v = rhs(q);
            double k2q = v + 0.5 * h * k1v, k2v = rhs(q + 0.5 * h * k1q);
            double k3q = v + 0.5 * h * k2v, k3v = rhs(q + 0.5 * h * k2q);
            double k4q = v + h * k3v, k4v = rhs(q + h * k3q);
            q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
            v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
            if (q < 0) return 1;
            if (v > 0) return -1;
        }
        return 0;
    };
    double lo = 1e-6, hi = 1.0;
    while (classify(hi) <= 0) {
        hi *= 2.0;
        if (hi > 1e6) throw NumericalError("ground-state shooting: no overshoot found");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (classify(mid) > 0 ? hi : lo) = mid;
    }
    double a = 0.5 * (lo + hi);
    // The bisected shot leaves the ground state once its rounding-level error,
    // growing like e^x, meets the e^{-x} decay near Q ~ 1e-7 a. Tabulate to
    // 1e-6 a and continue with the exponential tail beyond.
    tab_h_ = h;
    double q = a, v = 0.0;
    tab_q_ = {q};
    tab_dq_ = {v};
    while (q > 1e-6 * a) {
        double k1q = v, k1v = rhs(q);
        double k2q = v + 0.5 * h * k1v, k2v = rhs(q + 0.5 * h * k1q);
        double k3q = v + 0.5 * h * k2v, k3v = rhs(q + 0.5 * h * k2q);
        double k4q = v + h * k3v, k4v = rhs(q + h * k3q);
        q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
        v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
        tab_q_.push_back(q);
        tab_dq_.push_back(v);
        if (tab_q_.size() > 200000) throw NumericalError("ground-state shooting: tail not reached");
    }
    tab_max_ = h * (tab_q_.size() - 1);
    tail_c_ = tab_q_.back() * std::exp(tab_max_);
    size_t i1 = tab_q_.size() - 1, i0 = i1 - std::min<size_t>(i1 / 2, 2000);
    tail_rate_ = -std::log(tab_q_[i1] / tab_q_[i0]) / (h * (i1 - i0));
}

double GroundState::Q(double x) const {
    double ax = std::fabs(x);
    if (nl_.is_power()) {
        double y = c_ * ax;
        double log_sech = std::log(2.0) - y - std::log1p(std::exp(-2.0 * y));
        return clamp_tiny(amp_ * std::exp(m_ * log_sech));
    }
    if (ax >= tab_max_) return clamp_tiny(tail_c_ * std::exp(-ax));
    size_t i = static_cast<size_t>(ax / tab_h_);
    if (i + 1 >= tab_q_.size()) i = tab_q_.size() - 2;
    double s = (ax - i * tab_h_) / tab_h_;
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * tab_q_[i] + h10 * tab_h_ * tab_dq_[i] + h01 * tab_q_[i + 1] +
           h11 * tab_h_ * tab_dq_[i + 1];
}

double GroundState::dQ(double x) const {
    if (nl_.is_power()) return clamp_tiny(-m_ * c_ * std::tanh(c_ * x) * Q(x));
    double ax = std::fabs(x), sgn = x < 0 ? -1.0 : 1.0;
    if (ax >= tab_max_) return clamp_tiny(-sgn * tail_c_ * std::exp(-ax));
    size_t i = static_cast<size_t>(ax / tab_h_);
    if (i + 1 >= tab_q_.size()) i = tab_q_.size() - 2;
    double s = (ax - i * tab_h_) / tab_h_;
    double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    double v = (d00 * tab_q_[i] + d01 * tab_q_[i + 1]) / tab_h_ + d10 * tab_dq_[i] + d11 * tab_dq_[i + 1];
    return sgn * v;
}

double GroundState::d2Q(double x) const {
    double q = Q(x);
    return q - nl_.f(q);
}

double GroundState::d3Q(double x) const {
    double q = Q(x), dq = dQ(x);
    return dq - nl_.df(q) * dq;
}

// ---------------------------------------------------------------- sampling

Vec ground_state(const GroundState& gs, const Grid& grid) {
    grid.validate();
    Vec q(grid.n);
    for (int i = 0; i < grid.n; ++i) q[i] = gs.Q(grid.x(i));
    double q0 = gs.Q(0.0), edge = gs.Q(grid.half_width);
    if (edge >= 1e-12 * q0)
        throw ConfigError(fmt::format("domain too small: Q(L)/Q(0) = {:.3e} >= 1e-12", edge / q0));
    return q;
}

Vec ground_state(const Nonlinearity& nl, const Grid& grid) { return ground_state(GroundState(nl), grid); }

double ground_state_residual(const Vec& q, const Nonlinearity& nl, const Grid& grid) {
    double h2 = grid.h() * grid.h(), worst = 0.0;
    int n = grid.n;
    for (int i = 0; i < n; ++i) {
        double qm = q[(i + n - 1) % n], qp = q[(i + 1) % n];
        double r = (qp - 2 * q[i] + qm) / h2 - q[i] + nl.f(q[i]);
        worst = std::max(worst, std::fabs(r));
    }
    return worst;
}

FieldState boost(const GroundState& gs, const SolitonSpec& spec, double t, const Grid& grid) {
    spec.validate();
    double g = spec.gamma(), c = spec.center(t);
    FieldState s(grid.n, t);
    for (int i = 0; i < grid.n; ++i) {
        double y = g * wrap_periodic(grid.x(i) - c, grid.half_width);
        s.u1[i] = gs.Q(y);
        s.u2[i] = -spec.beta * g * gs.dQ(y);
    }
    return s;
}

FieldState multi_profile(const std::vector<SolitonSpec>& specs, const GroundState& gs, double t,
                         const Grid& grid) {
    if (specs.empty()) throw ConfigError("multi_profile needs at least one soliton");
    for (size_t i = 0; i < specs.size(); ++i)
        for (size_t k = i + 1; k < specs.size(); ++k)
            if (specs[i].beta == specs[k].beta)
                throw ConfigError(fmt::format("duplicate velocity beta={}", specs[i].beta));
    FieldState s(grid.n, t);
    for (const auto& sp : specs) axpy(1.0, boost(gs, sp, t, grid), s);
    return s;
}

// ---------------------------------------------------------------- snapshots

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        os.write(reinterpret_cast<const char*>(b), sizeof(T));
    } else {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
}

template <class T>
T get_le(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("snapshot truncated");
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

}  // namespace

void write_snapshot(std::ostream& os, const FieldState& s, const Grid& grid) {
    if (s.size() != grid.n) throw ConfigError("snapshot: state size does not match grid");
    os.write("NLKG1", 5);
    put_le<uint32_t>(os, static_cast<uint32_t>(grid.n));
    put_le<double>(os, grid.half_width);
    put_le<double>(os, s.t);
    for (double v : s.u1) put_le<double>(os, v);
    for (double v : s.u2) put_le<double>(os, v);
}

void write_snapshot(const std::string& path, const FieldState& s, const Grid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_snapshot(os, s, grid);
    if (!os) throw ConfigError("write failed: " + path);
}

FieldState read_snapshot(std::istream& is, const std::string& name, Grid* grid_out) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "NLKG1", 5) != 0) throw ConfigError(name + ": bad snapshot magic");
    uint32_t n = get_le<uint32_t>(is);
    double L = get_le<double>(is);
    double t = get_le<double>(is);
    if (n < 16 || n > (1u << 26)) throw ConfigError(name + ": implausible grid size");
    FieldState s(static_cast<int>(n), t);
    for (auto& v : s.u1) v = get_le<double>(is);
    for (auto& v : s.u2) v = get_le<double>(is);
    if (grid_out) *grid_out = Grid{L, static_cast<int>(n)};
    return s;
}

FieldState read_snapshot(const std::string& path, Grid* grid_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open snapshot " + path);
    return read_snapshot(is, path, grid_out);
}

}  // namespace nlkg
