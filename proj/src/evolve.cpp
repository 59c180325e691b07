#include "nlkg/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

namespace nlkg {

Scheme parse_scheme(const std::string& s) {
    if (s == "leapfrog") return Scheme::Leapfrog;
    if (s == "strang-spectral" || s == "strang") return Scheme::StrangSpectral;
    throw ConfigError(fmt::format("solver.scheme: unknown scheme '{}'", s));
}

Boundary parse_boundary(const std::string& s) {
    if (s == "periodic") return Boundary::Periodic;
    if (s == "dirichlet-pad" || s == "dirichlet") return Boundary::DirichletPad;
    throw ConfigError(fmt::format("solver.boundary: unknown boundary '{}'", s));
}

std::string to_string(Scheme s) { return s == Scheme::Leapfrog ? "leapfrog" : "strang-spectral"; }
std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "dirichlet-pad"; }

double SolverConfig::step_size(const Grid& grid) const {
    if (dt > 0.0) return dt;
    return scheme == Scheme::Leapfrog ? 0.25 * grid.h() : 0.5 * grid.h();
}

void SolverConfig::validate(const Grid& grid) const {
    if (dt < 0.0) throw ConfigError("solver.dt must be positive (0 selects the default)");
    if (!(cfl_safety > 0.0 && cfl_safety < 1.0)) throw ConfigError("solver.cfl_safety must lie in (0, 1)");
    if (snapshot_stride < 0) throw ConfigError("solver.snapshot_stride must be >= 0");
    if (series_stride < 1) throw ConfigError("solver.series_stride must be >= 1");
    if (!(blowup_factor > 1.0)) throw ConfigError("solver.blowup_factor must exceed 1");
    if (horizon < 0.0) throw ConfigError("solver.horizon must be >= 0");
    if (scheme == Scheme::Leapfrog) {
        double h = step_size(grid);
        if (h > cfl_safety * grid.h())
            throw ConfigError(fmt::format("solver.dt = {:.4g} violates the CFL bound {:.4g} = cfl_safety * h", h,
                                          cfl_safety * grid.h()));
        // The spectral Laplacian is stiffer than the 3-point stencil.
        double kmax = std::numbers::pi / grid.h();
        if (boundary == Boundary::Periodic && h * std::sqrt(kmax * kmax + 1.0) >= 2.0)
            throw ConfigError("solver.dt too large for leapfrog with the spectral Laplacian");
    }
}

// ---------------------------------------------------------------- record

void TrajectoryRecord::add_sample(double t, std::initializer_list<std::pair<const char*, double>> values) {
    std::vector<std::pair<std::string, double>> v;
    for (auto& [name, x] : values) v.emplace_back(name, x);
    add_sample(t, v);
}

void TrajectoryRecord::add_sample(double t, const std::vector<std::pair<std::string, double>>& values) {
    if (times_.size() >= 2) {
        double dir = times_[1] - times_[0];
        if ((t - times_.back()) * dir <= 0.0) throw NumericalError("trajectory times must be strictly monotone");
    } else if (!times_.empty() && t == times_.back()) {
        throw NumericalError("trajectory times must be strictly monotone");
    }
    if (cols_.empty()) {
        for (auto& [name, v] : values) cols_.emplace_back(name, Vec{});
    } else if (cols_.size() != values.size()) {
        throw NumericalError("trajectory sample does not match the recorded columns");
    }
    size_t c = 0;
    for (auto& [name, v] : values) {
        if (cols_[c].first != name) throw NumericalError("trajectory column order changed");
        cols_[c++].second.push_back(v);
    }
    times_.push_back(t);
}

const Vec& TrajectoryRecord::series(const std::string& name) const {
    for (auto& [n, v] : cols_)
        if (n == name) return v;
    throw NumericalError(fmt::format("trajectory has no series '{}'", name));
}

bool TrajectoryRecord::has(const std::string& name) const {
    return std::any_of(cols_.begin(), cols_.end(), [&](auto& c) { return c.first == name; });
}

std::vector<std::string> TrajectoryRecord::names() const {
    std::vector<std::string> out;
    for (auto& c : cols_) out.push_back(c.first);
    return out;
}

void TrajectoryRecord::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw NumericalError(fmt::format("cannot write {}", path));
    os << "t";
    for (auto& c : cols_) os << ',' << c.first;
    os << '\n';
    for (size_t i = 0; i < times_.size(); ++i) {
        os << fmt::format("{:.17g}", times_[i]);
        for (auto& c : cols_) os << fmt::format(",{:.17g}", c.second[i]);
        os << '\n';
    }
}

TrajectoryRecord TrajectoryRecord::read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(fmt::format("cannot open trajectory {}", path));
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(fmt::format("{}: empty trajectory file", path));
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) head.push_back(cell);
    }
    if (head.empty() || head[0] != "t") throw ConfigError(fmt::format("{}: first column must be 't'", path));
    TrajectoryRecord r;
    for (size_t c = 1; c < head.size(); ++c) r.cols_.emplace_back(head[c], Vec{});
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != head.size()) throw ConfigError(fmt::format("{}: ragged row", path));
        r.times_.push_back(vals[0]);
        for (size_t c = 1; c < vals.size(); ++c) r.cols_[c - 1].second.push_back(vals[c]);
    }
    return r;
}

// ---------------------------------------------------------------- invariants

double energy(const FieldState& s, const Nonlinearity& nl, const Fourier& fft) {
    Vec d = fft.derivative(s.u1);
    double e = 0.0;
    for (int i = 0; i < s.size(); ++i)
        e += s.u2[i] * s.u2[i] + d[i] * d[i] + s.u1[i] * s.u1[i] - 2.0 * nl.F(s.u1[i]);
    return 0.5 * e * fft.grid().h();
}

double momentum(const FieldState& s, const Fourier& fft) {
    Vec d = fft.derivative(s.u1);
    double p = 0.0;
    for (int i = 0; i < s.size(); ++i) p += s.u2[i] * d[i];
    return p * fft.grid().h();
}

// ---------------------------------------------------------------- stepper

Stepper::Stepper(const Grid& grid, const Nonlinearity& nl, const SolverConfig& cfg)
    : grid_(grid), nl_(nl), cfg_(cfg), dt_(cfg.step_size(grid)), fft_(grid), sine_(grid.n - 1) {
    cfg_.validate(grid_);
    if (cfg_.boundary == Boundary::Periodic) {
        omega_.resize(fft_.nmodes());
        for (int m = 0; m < fft_.nmodes(); ++m) omega_[m] = std::sqrt(fft_.k()[m] * fft_.k()[m] + 1.0);
    } else {
        int m = grid_.n - 1;
        omega_.resize(m);
        for (int q = 0; q < m; ++q) {
            double k = (q + 1) * std::numbers::pi / (2.0 * grid_.half_width);
            omega_[q] = std::sqrt(k * k + 1.0);
        }
    }
}

void Stepper::laplacian(const Vec& u, Vec& out) const {
    int n = grid_.n;
    if (cfg_.boundary == Boundary::Periodic) {
        out = fft_.second_derivative(u);
        return;
    }
    // Second-order stencil with u = 0 at x = -L (index 0) and at x = +L.
    double ih2 = 1.0 / (grid_.h() * grid_.h());
    out.assign(n, 0.0);
    for (int i = 1; i < n; ++i) {
        double right = (i + 1 < n) ? u[i + 1] : 0.0;
        out[i] = (u[i - 1] - 2.0 * u[i] + right) * ih2;
    }
}

void Stepper::linear_step(FieldState& s, double h) const {
    int n = grid_.n;
    if (cfg_.boundary == Boundary::Periodic) {
        int nm = fft_.nmodes();
        std::vector<cplx> a(nm), b(nm);
        fft_.forward(s.u1.data(), a.data());
        fft_.forward(s.u2.data(), b.data());
        for (int m = 0; m < nm; ++m) {
            double w = omega_[m], c = std::cos(w * h), sn = std::sin(w * h);
            cplx a1 = c * a[m] + (sn / w) * b[m];
            cplx b1 = -w * sn * a[m] + c * b[m];
            a[m] = a1;
            b[m] = b1;
        }
        fft_.inverse(a.data(), s.u1.data());
        fft_.inverse(b.data(), s.u2.data());
        return;
    }
    int m = n - 1;
    Vec a(m), b(m), ta(m), tb(m);
    sine_.apply(s.u1.data() + 1, ta.data());
    sine_.apply(s.u2.data() + 1, tb.data());
    for (int q = 0; q < m; ++q) {
        double w = omega_[q], c = std::cos(w * h), sn = std::sin(w * h);
        a[q] = c * ta[q] + (sn / w) * tb[q];
        b[q] = -w * sn * ta[q] + c * tb[q];
    }
    double norm = 1.0 / (2.0 * (m + 1));
    sine_.apply(a.data(), s.u1.data() + 1);
    sine_.apply(b.data(), s.u2.data() + 1);
    for (int i = 1; i < n; ++i) {
        s.u1[i] *= norm;
        s.u2[i] *= norm;
    }
    s.u1[0] = 0.0;
    s.u2[0] = 0.0;
}

void Stepper::step(FieldState& s, double h) const {
    int n = grid_.n;
    if (s.size() != n) throw NumericalError("step: state does not match the grid");
    if (cfg_.scheme == Scheme::StrangSpectral) {
        for (int i = 0; i < n; ++i) s.u2[i] += 0.5 * h * nl_.f(s.u1[i]);
        linear_step(s, h);
        for (int i = 0; i < n; ++i) s.u2[i] += 0.5 * h * nl_.f(s.u1[i]);
    } else {
        Vec lap;
        auto kick = [&]() {
            laplacian(s.u1, lap);
            for (int i = 0; i < n; ++i) s.u2[i] += 0.5 * h * (lap[i] - s.u1[i] + nl_.f(s.u1[i]));
        };
        kick();
        for (int i = 0; i < n; ++i) s.u1[i] += h * s.u2[i];
        kick();
        if (cfg_.boundary == Boundary::DirichletPad) s.u1[0] = s.u2[0] = 0.0;
    }
    s.t += h;
}

// ---------------------------------------------------------------- driver

namespace {

double sup_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

std::pair<FieldState, TrajectoryRecord> evolve_to(const FieldState& state, double t_target, const Grid& grid,
                                                  const Nonlinearity& nl, const SolverConfig& cfg) {
    if (state.size() != grid.n) throw NumericalError("evolve_to: state does not match the grid");
    if (!state.finite()) throw NumericalError("evolve_to: initial state is not finite");
    Stepper st(grid, nl, cfg);
    const double span = t_target - state.t;
    const bool backward = span < 0.0;
    FieldState s = state;
    TrajectoryRecord rec;
    auto observe = [&](const FieldState& x, double t) {
        FieldState phys = x;
        if (backward)
            for (double& v : phys.u2) v = -v;
        rec.add_sample(t, {{"energy", energy(phys, nl, st.fft())},
                           {"momentum", momentum(phys, st.fft())},
                           {"sup_u", sup_norm(phys.u1)}});
        return phys;
    };
    if (span == 0.0) {
        observe(s, s.t);
        return {s, rec};
    }
    const int steps = static_cast<int>(std::ceil(std::fabs(span) / st.dt() - 1e-9));
    const double h = std::fabs(span) / steps;
    if (backward)
        for (double& v : s.u2) v = -v;
    const double t_start = state.t;
    const double sign = backward ? -1.0 : 1.0;
    const double limit = cfg.blowup_factor * std::max(sup_norm(state.u1), 1e-12);
    observe(s, t_start);
    if (cfg.snapshot_stride > 0) rec.add_snapshot(state);
    for (int k = 1; k <= steps; ++k) {
        st.step(s, h);
        double t = t_start + sign * k * h;
        double sup = sup_norm(s.u1);
        if (!std::isfinite(sup) || sup > limit)
            throw NumericalError(
                fmt::format("blow-up at t = {:.6g}: sup|u| = {:.3e} exceeds {:.3e}", t, sup, limit));
        if (k % cfg.series_stride == 0 || k == steps) observe(s, t);
        if (cfg.snapshot_stride > 0 && (k % cfg.snapshot_stride == 0 || k == steps)) {
            FieldState phys = s;
            if (backward)
                for (double& v : phys.u2) v = -v;
            phys.t = t;
            rec.add_snapshot(phys);
        }
    }
    if (backward)
        for (double& v : s.u2) v = -v;
    s.t = t_target;
    return {s, rec};
}

}  // namespace nlkg
