#pragma once

#include <complex>

#include "nlkg/profiles.hpp"

namespace nlkg {

using cplx = std::complex<double>;

/// Real FFT helpers on a periodic Grid.
///
/// Plans are shared process-wide and created under a lock; each Fourier object
/// owns its scratch buffers, so one object must not be used by two threads at once.
class Fourier {
public:
    explicit Fourier(const Grid& grid);

    const Grid& grid() const { return grid_; }
    int n() const { return grid_.n; }
    int nmodes() const { return grid_.n / 2 + 1; }
    /// Wavenumbers k_m = m pi / L, m = 0..n/2.
    const Vec& k() const { return k_; }

    void forward(const double* in, cplx* out) const;
    /// Normalized inverse (includes the 1/n factor). `in` is left untouched.
    void inverse(const cplx* in, double* out) const;

    /// Spectral first derivative (Nyquist mode dropped, so the matrix is skew).
    Vec derivative(const Vec& u) const;
    /// Spectral second derivative (Nyquist mode kept with -k_N^2).
    Vec second_derivative(const Vec& u) const;
    /// Returns v with v(x) = u(x - s).
    Vec shift(const Vec& u, double s) const;
    FieldState shift(const FieldState& u, double s) const;

private:
    Grid grid_;
    Vec k_;
    void* plan_fwd_;
    void* plan_inv_;
    mutable std::vector<cplx> spec_;
    mutable Vec buf_;
};

/// Index of the last Fourier mode that stands clear of the rounding plateau:
/// the plateau level is the median magnitude over the top quarter of modes and
/// a mode is kept while it exceeds `margin` times that level.
int plateau_cutoff(const std::vector<cplx>& spec, double margin = 4.0);
/// Zeroes every mode above plateau_cutoff. Returns the cutoff.
int strip_plateau(Vec& u, const Fourier& fft, double margin = 4.0);

/// Type-I sine transform on the n-1 interior points of a Dirichlet box.
class SineTransform {
public:
    explicit SineTransform(int m);
    int size() const { return m_; }
    /// Unnormalized RODFT00; applying it twice multiplies by 2(m+1).
    void apply(const double* in, double* out) const;

private:
    int m_;
    void* plan_;
};

}  // namespace nlkg
