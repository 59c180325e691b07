#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nlkg/fourier.hpp"
#include "nlkg/profiles.hpp"

namespace nlkg {

enum class Scheme { Leapfrog, StrangSpectral };
enum class Boundary { Periodic, DirichletPad };

Scheme parse_scheme(const std::string& s);
Boundary parse_boundary(const std::string& s);
std::string to_string(Scheme s);
std::string to_string(Boundary b);

struct SolverConfig {
    double dt = 0.0;  ///< 0 selects the scheme default (0.25 h leapfrog, 0.5 h strang)
    Scheme scheme = Scheme::StrangSpectral;
    Boundary boundary = Boundary::Periodic;
    double cfl_safety = 0.5;
    int snapshot_stride = 0;  ///< 0 disables snapshots
    int series_stride = 1;
    double blowup_factor = 1e3;
    double horizon = 0.0;     ///< latest time any run may reach; 0 = unbounded

    double step_size(const Grid& grid) const;
    void validate(const Grid& grid) const;
};

/// Scalar series on a common, strictly monotone time axis plus sparse snapshots.
class TrajectoryRecord {
public:
    void add_sample(double t, std::initializer_list<std::pair<const char*, double>> values);
    void add_sample(double t, const std::vector<std::pair<std::string, double>>& values);
    void add_snapshot(const FieldState& s) { snapshots_.push_back(s); }

    const Vec& times() const { return times_; }
    const Vec& series(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<std::string> names() const;
    const std::vector<FieldState>& snapshots() const { return snapshots_; }
    size_t size() const { return times_.size(); }

    void write_csv(const std::string& path) const;
    static TrajectoryRecord read_csv(const std::string& path);

private:
    Vec times_;
    std::vector<std::pair<std::string, Vec>> cols_;
    std::vector<FieldState> snapshots_;
};

/// E = 1/2 int (u2^2 + u1x^2 + u1^2 - 2 F(u1)); spectral derivative on the periodic box.
double energy(const FieldState& s, const Nonlinearity& nl, const Fourier& fft);
/// P = int u2 u1x.
double momentum(const FieldState& s, const Fourier& fft);

/// One-step integrator for u_tt = u_xx - u + f(u). Both schemes are symmetric,
/// so step(-dt) inverts step(dt) up to rounding.
class Stepper {
public:
    Stepper(const Grid& grid, const Nonlinearity& nl, const SolverConfig& cfg);

    double dt() const { return dt_; }
    const Grid& grid() const { return grid_; }
    const SolverConfig& config() const { return cfg_; }

    /// Advances by h (negative h runs the same symmetric map backward).
    void step(FieldState& s, double h) const;
    void step(FieldState& s) const { step(s, dt_); }

    /// Exact free Klein-Gordon propagation over h (strang scheme only).
    void linear_step(FieldState& s, double h) const;
    /// Same propagator applied to an arbitrary state (used by the deviation engine).
    const Fourier& fft() const { return fft_; }

private:
    Grid grid_;
    Nonlinearity nl_;
    SolverConfig cfg_;
    double dt_;
    Fourier fft_;
    SineTransform sine_;
    Vec omega_;  // per mode, periodic or sine basis
    void laplacian(const Vec& u, Vec& out) const;
};

/// Integrates to t_target. Backward runs apply (u1, u2) -> (u1, -u2), integrate
/// forward and map back. Throws NumericalError on blow-up.
std::pair<FieldState, TrajectoryRecord> evolve_to(const FieldState& state, double t_target, const Grid& grid,
                                                  const Nonlinearity& nl, const SolverConfig& cfg);

}  // namespace nlkg
