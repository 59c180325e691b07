#include "nlkg/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace nlkg {

namespace {

std::mutex g_plan_mutex;

struct RealPlans {
    fftw_plan fwd = nullptr, inv = nullptr;
};

// FFTW_ESTIMATE keeps plan choice (and therefore rounding) identical across runs.
RealPlans& real_plans(int n) {
    static std::map<int, RealPlans> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    RealPlans p;
    p.fwd = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.inv = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    return cache.emplace(n, p).first->second;
}

fftw_plan sine_plan(int m) {
    static std::map<int, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    double* a = fftw_alloc_real(m);
    double* b = fftw_alloc_real(m);
    fftw_plan p = fftw_plan_r2r_1d(m, a, b, FFTW_RODFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(a);
    fftw_free(b);
    return cache.emplace(m, p).first->second;
}

}  // namespace

Fourier::Fourier(const Grid& grid) : grid_(grid) {
    grid_.validate();
    auto& p = real_plans(grid_.n);
    plan_fwd_ = p.fwd;
    plan_inv_ = p.inv;
    k_.resize(nmodes());
    for (int m = 0; m < nmodes(); ++m) k_[m] = m * std::numbers::pi / grid_.half_width;
    spec_.resize(nmodes());
    buf_.resize(grid_.n);
}

void Fourier::forward(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void Fourier::inverse(const cplx* in, double* out) const {
    // c2r destroys its input, so work on a copy.
    std::vector<cplx> tmp(in, in + nmodes());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_), reinterpret_cast<fftw_complex*>(tmp.data()),
                         out);
    double s = 1.0 / grid_.n;
    for (int i = 0; i < grid_.n; ++i) out[i] *= s;
}

Vec Fourier::derivative(const Vec& u) const {
    forward(u.data(), spec_.data());
    for (int m = 0; m < nmodes(); ++m) spec_[m] *= cplx(0.0, k_[m]);
    spec_[nmodes() - 1] = 0.0;
    Vec out(grid_.n);
    inverse(spec_.data(), out.data());
    return out;
}

Vec Fourier::second_derivative(const Vec& u) const {
    forward(u.data(), spec_.data());
    for (int m = 0; m < nmodes(); ++m) spec_[m] *= -k_[m] * k_[m];
    Vec out(grid_.n);
    inverse(spec_.data(), out.data());
    return out;
}

Vec Fourier::shift(const Vec& u, double s) const {
    forward(u.data(), spec_.data());
    for (int m = 0; m < nmodes() - 1; ++m) spec_[m] *= std::polar(1.0, -k_[m] * s);
    spec_[nmodes() - 1] *= std::cos(k_[nmodes() - 1] * s);
    Vec out(grid_.n);
    inverse(spec_.data(), out.data());
    return out;
}

FieldState Fourier::shift(const FieldState& u, double s) const {
    FieldState r;
    r.t = u.t;
    r.u1 = shift(u.u1, s);
    r.u2 = shift(u.u2, s);
    return r;
}

int plateau_cutoff(const std::vector<cplx>& spec, double margin) {
    int nm = static_cast<int>(spec.size());
    Vec top;
    for (int m = 3 * nm / 4; m < nm; ++m) top.push_back(std::abs(spec[m]));
    std::nth_element(top.begin(), top.begin() + top.size() / 2, top.end());
    double floor = top[top.size() / 2];
    int last = nm - 1;
    while (last > 0 && std::abs(spec[last]) <= margin * floor) --last;
    return last;
}

int strip_plateau(Vec& u, const Fourier& fft, double margin) {
    int nm = fft.nmodes();
    std::vector<cplx> s(nm);
    fft.forward(u.data(), s.data());
    int last = plateau_cutoff(s, margin);
    if (last >= nm - 1) return last;
    for (int m = last + 1; m < nm; ++m) s[m] = 0.0;
    fft.inverse(s.data(), u.data());
    return last;
}

SineTransform::SineTransform(int m) : m_(m), plan_(sine_plan(m)) {}

void SineTransform::apply(const double* in, double* out) const {
    fftw_execute_r2r(static_cast<fftw_plan>(plan_), const_cast<double*>(in), out);
}

}  // namespace nlkg
