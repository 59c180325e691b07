#pragma once

#include <string>

#include "nlkg/deviation.hpp"

namespace nlkg {

struct RateFit {
    double rate = 0.0, intercept = 0.0, r2 = 0.0;
    int samples = 0;
};

/// Least-squares line through (t, log v) for samples with t in [t_lo, t_hi].
/// Throws NumericalError on nonpositive values or fewer than five samples.
RateFit fit_rate(const Vec& t, const Vec& v, double t_lo, double t_hi);

struct Alphas {
    Vec plus, minus;
};

/// alpha_{+-,k} = <state - reference, Z_{+-,k}(t)> at t = state.t.
Alphas project_alphas(const FieldState& state, const FieldState& reference, const DeviationModel& model);
/// Same for an already formed difference W.
Alphas project_alphas(const FieldState& W, const DeviationModel& model);

/// Shift x such that W = state - R(. - x) satisfies <W, d_x R(. - x)> = 0,
/// where R is soliton k of the model re-centered at spec.center(t) + x.
/// Scalar Newton; throws NumericalError on divergence.
double modulate_center(const FieldState& state, const DeviationModel& model, int k, double tol = 1e-10,
                       int max_iter = 50);

struct ModulationSample {
    double t = 0.0;
    Vec a, b;                ///< coefficients of d_x R_i and Y+,i
    Vec a_leading, b_leading;  ///< <Z, d_x R_i>/||d_x R_i||^2 and <Z, Z-,i>
    FieldState E;
    double orth_residual = 0.0;  ///< max |<E, d_x R_i>|, |<E, Z-,i>|
};

/// Z = sum a_i d_x R_i + sum b_i Y+,i + E with E orthogonal to every d_x R_i and
/// Z-,i; the 2N x 2N Gram system is solved directly.
ModulationSample modulate_full(const FieldState& Z, const DeviationModel& model);

struct ModulationTrack {
    Vec t, x;
    std::vector<Vec> a, b, alpha_plus, alpha_minus;
    Vec orth_residual;
};

/// phi_k(t) for k = 1..N in order of position: phi_k = psi_k - psi_{k-1} with
/// psi_k = psi((x - m_k)/sqrt t), psi(x) = (2/pi) arctan(e^{-x}), m_k the
/// midpoint between the k-th and (k+1)-th soliton from the left. The result is
/// indexed by soliton, so phi[i] is the cut-off around soliton i.
std::vector<Vec> cutoff_psi_phi(double t, const Grid& grid, const std::vector<SolitonSpec>& specs);
double cutoff_psi(double x);
/// Soliton indices sorted by center at time t (left to right).
std::vector<int> position_order(double t, const std::vector<SolitonSpec>& specs);

/// sum_k int (w1^2 + w1x^2 + w2^2 - f'(Q_eta(k)) w1^2 + 2 beta_eta(k) w1x w2) phi_k.
double lyapunov_FW(const FieldState& W, double t, const DeviationModel& model, const std::vector<Vec>& phi);

struct ChiValue {
    double value = 0.0, slope = 0.0;  ///< chi and d_x chi
};

/// Piecewise linear velocity profile: plateau beta_eta(i) around soliton
/// eta(i), linear ramps on Omega(t) between neighbours. Throws ConfigError when
/// delta is outside (0, 1/4) or the solitons are not separated.
ChiValue chi_profile(double t, double x, double delta, const std::vector<SolitonSpec>& specs);
Vec chi_samples(double t, double delta, const std::vector<SolitonSpec>& specs, const Grid& grid,
                Vec* slope = nullptr);
/// min(0.1, min gap / (4 max gap)) over consecutive sorted velocities.
double default_delta(const std::vector<SolitonSpec>& specs);
/// Intervals of Omega(t) (ramps) ordered left to right.
std::vector<std::pair<double, double>> omega_intervals(double t, double delta, const std::vector<SolitonSpec>& specs);

/// int (z_x^2 + z_t^2 + z^2 - f'(phi1) z^2) + 2 int chi z_x z_t.
double lyapunov_F(const FieldState& z, const Vec& chi, const Vec& phi1, const Nonlinearity& nl,
                  const Fourier& fft);

struct MonotonicityReport {
    double c1 = 0.0, c2 = 0.0;
    int samples = 0, violations = 0;
    double max_ratio = 0.0;  ///< max D / envelope on the check half
    Vec t, defect, envelope;
    bool passed = false;
};

/// D(t) = -F'(t) - (lambda/t) F(t) by centered differences, compared with
/// c1 (1/t) sum alpha_+^2 + c2 (e^{-gamma t} ||Z||^2 + ||Z||^3). c1, c2 are the
/// tightest nonnegative envelope on the first half of the samples (a
/// two-variable LP); violations beyond `factor` x envelope are counted on the
/// second half. Times must be strictly monotone.
MonotonicityReport check_monotonicity(const Vec& t, const Vec& F, const Vec& alpha_plus_sq, const Vec& Znorm,
                                      double lambda, double gamma, double factor = 3.0);

struct Plateau {
    double value = 0.0, error = 0.0;
    int samples = 0;
};

/// Plateau of e^{e t} alpha_-(t) over the late third of the time span.
/// Throws NumericalError when the drift exceeds `tol` (absolute) + 5% of |value|.
Plateau extract_A(const Vec& t, const Vec& alpha_minus, double e, double tol = 1e-12);

/// alpha_-,j(t) of member - base along a family trajectory pair sampled on
/// the same nodes.
Vec projection_series(const DeviationModel& model, const FamilyTrajectory& member, const FamilyTrajectory& base,
                      int j);

struct DecayCheck {
    double rate = 0.0, r2 = 0.0, xi_integral = 0.0;
    bool passed = false;
};

/// Decay check for a positive series with |A' + rho A| <= xi(t) A: estimates xi
/// from centered differences, integrates it, and fits the decay rate over the
/// late half of the span. Passes when rate <= -rho + tol.
DecayCheck verify_decay(const Vec& t, const Vec& A, double rho, double tol = 0.05);

/// Knobs of the family analysis. Zero means "derive from the run".
struct AnalysisConfig {
    double delta = 0.0;        ///< chi ramp buffer, default_delta when 0
    double lambda_exp = 2.0;   ///< monotonicity exponent, must exceed 1
    double gamma = 0.0;        ///< rate in the envelope; 0 = sigma delta (min gap) / 2
    double factor = 3.0;       ///< violation threshold relative to the fitted envelope
    double plateau_tol = 1e-12;
    double decay_tol = 0.05;
};

/// Everything the harness reports for one sampled family member. Series are
/// in ascending time.
struct FamilyAnalysis {
    Vec t;
    std::vector<Vec> alpha_plus, alpha_minus;  ///< [k][sample]
    std::vector<Plateau> A;                    ///< extract_A per soliton
    std::vector<std::string> A_error;          ///< nonempty where no plateau was found
    Vec Znorm, remainder, F, alpha_plus_sq;
    std::vector<Vec> mod_a, mod_b;             ///< modulate_full coefficients [k][sample]
    double max_orth_residual = 0.0;            ///< relative to ||Z||
    RateFit Z_fit, remainder_fit;
    bool remainder_fit_ok = false;
    MonotonicityReport monotonicity;
    double delta = 0.0, gamma = 0.0, lambda = 0.0;
};

/// Z(t) = member - base and the first component of the base (the f' weight in
/// F). `A` are the amplitudes subtracted in the remainder
/// ||Z - sum A_i e^{-e_i t} Y+,i||, fitted on [t_lo, t_hi]. Throws
/// NumericalError when fewer than seven samples are given.
FamilyAnalysis analyze_family(const DeviationModel& model, const std::vector<FieldState>& Z,
                              const std::vector<FieldState>& base, const Vec& A, double sigma,
                              const AnalysisConfig& cfg, double t_lo, double t_hi);

}  // namespace nlkg
