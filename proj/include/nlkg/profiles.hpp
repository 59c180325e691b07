#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

#include "nlkg/common.hpp"

namespace nlkg {

/// Uniform grid x_i = -L + i h on [-L, L), h = 2L/n.
struct Grid {
    double half_width = 40.0;
    int n = 2048;

    double h() const { return 2.0 * half_width / n; }
    double x(int i) const { return -half_width + i * h(); }
    Vec points() const;
    void validate() const;
    bool operator==(const Grid& o) const { return half_width == o.half_width && n == o.n; }
};

/// Minimum-image representative of xi in [-L, L) for the periodic box.
double wrap_periodic(double xi, double half_width);

/// f(u) = coeff |u|^{p-1} u, or a user-supplied (f, f', f'') triple.
class Nonlinearity {
public:
    using Fn = std::function<double(double)>;

    Nonlinearity() = default;
    static Nonlinearity power(double p, double coeff = 1.0);
    /// Custom hook. Throws ConfigError if f fails the oddness self-check.
    static Nonlinearity custom(Fn f, Fn df, Fn d2f);

    bool is_power() const { return !f_; }
    double p() const { return p_; }
    double coeff() const { return coeff_; }

    double f(double u) const;
    double df(double u) const;
    double d2f(double u) const;
    /// Potential F(u) = int_0^u f.
    double F(double u) const;

    /// f(s+d) - f(s), evaluated without cancellation for the power law.
    double diff(double s, double d) const;
    /// f'(s+d) - f'(s), same care.
    double ddiff(double s, double d) const;
    /// f(s+d) - f(s) - f'(s) d, same care.
    double incr(double s, double d) const;

    void validate() const;

private:
    double p_ = 3.0;
    double coeff_ = 1.0;
    Fn f_, df_, d2f_;
};

/// Galilean data of one traveling soliton.
struct SolitonSpec {
    double beta = 0.0;
    double x0 = 0.0;

    double gamma() const;
    double center(double t) const { return x0 + beta * t; }
    void validate() const;
};

/// Sampled pair (u, du/dt) at time t.
struct FieldState {
    Vec u1, u2;
    double t = 0.0;

    FieldState() = default;
    explicit FieldState(int n, double t_ = 0.0) : u1(n, 0.0), u2(n, 0.0), t(t_) {}
    int size() const { return static_cast<int>(u1.size()); }
    bool finite() const;
};

// Small helpers on pairs.
FieldState operator+(const FieldState& a, const FieldState& b);
FieldState operator-(const FieldState& a, const FieldState& b);
FieldState operator*(double s, const FieldState& a);
void axpy(double a, const FieldState& x, FieldState& y);
/// J(u1, u2) = (u2, -u1).
FieldState apply_J(const FieldState& a);

/// Evaluates Q and its first three derivatives at arbitrary x.
///
/// For the pure power the closed form is used. Custom nonlinearities get a
/// shooting solve on [0, x_max] and a cubic Hermite table with an exponential
/// tail beyond it.
class GroundState {
public:
    explicit GroundState(const Nonlinearity& nl);

    double Q(double x) const;
    double dQ(double x) const;
    double d2Q(double x) const;
    double d3Q(double x) const;
    /// Measured exponential tail rate of Q (1 for every admissible f).
    double tail_rate() const { return tail_rate_; }
    const Nonlinearity& nonlinearity() const { return nl_; }

private:
    Nonlinearity nl_;
    // closed form: Q = amp * sech(c x)^m
    double amp_ = 0, c_ = 0, m_ = 0;
    // tabulated (custom)
    double tab_h_ = 0, tab_max_ = 0, tail_c_ = 0;
    Vec tab_q_, tab_dq_;
    double tail_rate_ = 1.0;
    void shoot();
};

/// Samples of Q on the grid; checks the tail is below 1e-12 Q(0).
Vec ground_state(const GroundState& gs, const Grid& grid);
Vec ground_state(const Nonlinearity& nl, const Grid& grid);
/// max |D2 Q - Q + f(Q)| with the 3-point stencil.
double ground_state_residual(const Vec& q, const Nonlinearity& nl, const Grid& grid);

/// R_{beta,x0}(t) sampled on the grid (minimum-image in the periodic box).
FieldState boost(const GroundState& gs, const SolitonSpec& spec, double t, const Grid& grid);
/// Sum of boosts; velocities must be distinct.
FieldState multi_profile(const std::vector<SolitonSpec>& specs, const GroundState& gs, double t,
                         const Grid& grid);

/// Binary snapshot: "NLKG1", u32 n, f64 half_width, f64 t, u1[n], u2[n]; little endian.
void write_snapshot(const std::string& path, const FieldState& s, const Grid& grid);
FieldState read_snapshot(const std::string& path, Grid* grid_out = nullptr);
/// Stream forms; a series file is a plain concatenation of records.
void write_snapshot(std::ostream& os, const FieldState& s, const Grid& grid);
FieldState read_snapshot(std::istream& is, const std::string& name, Grid* grid_out = nullptr);

}  // namespace nlkg
