#pragma once

#include <functional>
#include <memory>

#include "nlkg/evolve.hpp"
#include "nlkg/spectral.hpp"

namespace nlkg {

/// Translates one centered two-component profile by spectral phase shifts.
/// A nonnegative cutoff drops every mode above that index.
class ShiftedProfile {
public:
    ShiftedProfile() = default;
    ShiftedProfile(const FieldState& centered, const Fourier& fft, int cutoff = -1);
    FieldState at(double center, const Fourier& fft) const;

private:
    std::vector<cplx> s1_, s2_;
};

/// Uniform backward time grid from S down to t_end with t(K) = t_end exactly.
struct TimeGrid {
    double S = 0.0, t_end = 0.0, h = 0.0;
    int K = 0;

    TimeGrid() = default;
    TimeGrid(double S_, double t_end_, double dt_max);
    double t(int m) const { return m == K ? t_end : S - m * h; }
};

/// Everything that depends on time only at one grid node.
struct Frame {
    double t = 0.0;
    std::vector<Vec> R1;          ///< u1 of each soliton
    Vec S1;                       ///< sum of the R1
    Vec inter;                    ///< f(S1) - sum f(R1_i)
    std::vector<FieldState> Yp;   ///< Y+,k translated to the soliton center
    std::vector<FieldState> defect;  ///< discrete defect of the linear mode profile
    std::vector<FieldState> Zm, Zp;
};

/// Solitons plus linear unstable modes, the background of the deviation
/// formulation U = sum R_i + sum c_k e^{-e_k t} Y+,k + V.
///
/// Not thread-safe (owns FFT scratch); build one per worker. Bundles are shared.
class DeviationModel {
public:
    DeviationModel(const Grid& grid, const GroundState& gs, std::vector<SolitonSpec> specs,
                   std::vector<std::shared_ptr<const SpectralBundle>> bundles);

    int size() const { return static_cast<int>(specs_.size()); }
    const Grid& grid() const { return grid_; }
    const Fourier& fft() const { return fft_; }
    const GroundState& ground_state() const { return gs_; }
    const Nonlinearity& nonlinearity() const { return gs_.nonlinearity(); }
    const SolitonSpec& spec(int k) const { return specs_[k]; }
    const SpectralBundle& bundle(int k) const { return *bundles_[k]; }
    double rate(int k) const { return bundles_[k]->e; }

    /// Bundle profile of soliton k translated to its center at time t.
    FieldState profile(int k, SpectralBundle::Profile p, double t) const;
    /// sum R_i(t) in closed form.
    FieldState solitons(double t) const;
    /// sum_k c_k e^{-e_k t} Y+,k(t).
    FieldState modes(const Vec& c, double t) const;
    /// Full field S + D + V at time V.t.
    FieldState state(const Vec& c, const FieldState& V) const;

    void fill_frame(double t, Frame& fr, bool with_projectors) const;
    /// Right-hand side source of the V equation at a frame (both components).
    void source(const Frame& fr, const Vec& c, const FieldState& V, FieldState& out) const;

    /// Largest relative defect of the stored mode profiles (diagnostic).
    double mode_defect() const { return mode_defect_; }

private:
    Grid grid_;
    GroundState gs_;
    std::vector<SolitonSpec> specs_;
    std::vector<std::shared_ptr<const SpectralBundle>> bundles_;
    Fourier fft_;
    std::vector<ShiftedProfile> yp_, defect_, zm_, zp_;
    double mode_defect_ = 0.0;
};

/// Sampled deviation V of one family member, with the mode coefficients that
/// complete it: U = sum R_i + sum c_k e^{-e_k t} Y+,k + V at each sample.
struct FamilyTrajectory {
    Vec times;  ///< descending from S to t0
    std::vector<Vec> c;
    std::vector<FieldState> V;

    bool empty() const { return times.empty(); }
    size_t size() const { return times.size(); }
    /// U - other at sample s, formed without cancelling the O(1) solitons.
    FieldState difference(const FamilyTrajectory& other, size_t s, const DeviationModel& model) const;
    FieldState state(size_t s, const DeviationModel& model) const { return model.state(c[s], V[s]); }
};

/// Observer: (node index, frame, V, c). Return false to stop the run early.
using NodeObserver = std::function<bool(int, const Frame&, const FieldState&, const Vec&)>;

/// Integrates V backward over a TimeGrid with a Strang split: half source kick,
/// exact Klein-Gordon propagation, half source kick.
class DeviationIntegrator {
public:
    DeviationIntegrator(const DeviationModel& model, const Nonlinearity& nl, const Grid& grid);

    /// Runs from V(S) = V_S down to tg.t_end (or until the observer stops it).
    /// Returns V at the last node reached; c holds the matching coefficients.
    ///
    /// With `absorb`, the Z- content of V is moved into the exact mode terms at
    /// every node (U is unchanged). Backward runs amplify the unstable
    /// directions, and keeping them out of V keeps V, and with it the
    /// splitting error, small.
    FieldState run(Vec& c, const TimeGrid& tg, const FieldState& V_S, const NodeObserver& obs,
                   bool with_projectors = true, bool absorb = false) const;

private:
    const DeviationModel& model_;
    Stepper lin_;
};

}  // namespace nlkg
