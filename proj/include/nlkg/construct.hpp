#pragma once

#include <memory>
#include <string>

#include "nlkg/analyze.hpp"

namespace nlkg {

struct ConstructionConfig {
    std::vector<SolitonSpec> specs;  ///< ordered with |beta_1| > ... > |beta_N| > 0
    Vec A;                           ///< target amplitudes
    double t0 = 5.0;
    Vec schedule;                    ///< increasing final times S_n
    double sigma = 0.0;              ///< 0 selects sigma_formula
    double dt = 0.0;                 ///< 0 selects half a grid cell
    int bisection_iters = 60;
    int fixed_point_iters = 200;
    double damping = 0.8;
    int scan_points = 7;             ///< per axis, grid-scan fallback
    double newton_tol = 1e-12;       ///< on |alpha_-(t0)| relative to the box radius at t0
    int sample_stride = 4;           ///< node stride of recorded series
    int threads = 0;                 ///< 0 = hardware concurrency

    /// Default schedule t0 + 4n, n = 1..5.
    static Vec default_schedule(double t0, int count = 5);
    /// (1/16) min{e_1, gamma_N * min gap of the sorted velocities}.
    static double sigma_formula(const std::vector<SolitonSpec>& specs, const Vec& rates);

    /// Throws ConfigError on ordering, amplitude or schedule problems.
    /// `rates` are the e_k of the specs in order.
    void validate(const Vec& rates) const;
    double sigma_value(const Vec& rates) const { return sigma > 0.0 ? sigma : sigma_formula(specs, rates); }
};

/// U(t0) = R_beta(S) + A e^{-e S} Y+(S) evaluated on the grid. Warns on stderr
/// when the perturbation exceeds a tenth of the soliton norm.
FieldState final_data_single(const SolitonSpec& spec, double A, double S, const SpectralBundle& bundle,
                             const GroundState& gs);

struct SingleResult {
    FieldState U_t0;             ///< for the largest S_n
    Vec S;                       ///< schedule actually run
    Vec stabilization;           ///< ||U_n(t0) - U_{n+1}(t0)||, one per consecutive pair
    double max_stabilization = 0.0;
    bool stabilizing = true;
    TrajectoryRecord residual;   ///< columns r (energy norm of V) and r_l2, largest S_n
    RateFit fit;                 ///< log r on [t0 + 2, S - 2]
    FamilyTrajectory member;     ///< largest S_n
    double mode_defect = 0.0;
};

/// Backward construction of U^A for one soliton. Each S_n is an independent
/// run from V(S_n) = 0; runs are spread over cfg.threads workers.
SingleResult construct_single(const SolitonSpec& spec, double A, const ConstructionConfig& cfg,
                              std::shared_ptr<const SpectralBundle> bundle, const GroundState& gs);

struct ModulationSolve {
    Vec b;
    double psi_deviation = 0.0;  ///< ||Psi - I||_2
    bool bound_ok = true;        ///< |b| <= 2 |a|
};

/// b = Psi^{-1} a with Psi_kl = <Y+,l(S), Z-,k(S)> over the free indices.
/// Throws NumericalError when ||Psi - I|| > 1/2.
ModulationSolve solve_modulation_b(const Vec& a, double S, const DeviationModel& model,
                                   const std::vector<int>& free);

struct ShootingOutcome {
    Vec a, b;
    double exit_time = 0.0;
    Vec exit_projection;         ///< alpha_-(T)
    Vec rescaled;                ///< e^{rho (T - S)} alpha_-(T)
    Vec alpha_t0;                ///< alpha_-(t0); empty unless T reached t0
    bool exited = false;         ///< a box condition failed above t0
    bool converged = false;
    double psi_deviation = 0.0;
    bool bound_ok = true;
    Vec crossing_slopes;         ///< one-sided dN/dt at detected N = 1 crossings
    TrajectoryRecord trajectory; ///< t, normW, N and alpha_minus_k per sample
};

/// One construction stage at a fixed final time. Stage 0 shoots the base
/// multi-soliton with every direction free; stage j >= 1 adds A_j Y+,j on top of
/// the stage j-1 member and shoots in the directions j+1..N.
class StageContext {
public:
    /// `prev` holds every node of the stage j-1 member (null for stage 0).
    StageContext(const DeviationModel& model, const ConstructionConfig& cfg, double sigma, double S, int j,
                 std::shared_ptr<const FamilyTrajectory> prev);

    int stage() const { return j_; }
    const std::vector<int>& free() const { return free_; }
    double rho() const { return rho_; }
    double radius() const { return std::exp(-rho_ * S_); }
    const TimeGrid& time_grid() const { return tg_; }
    double rate(int k) const { return model_.rate(k); }
    /// alpha_-(t0) when the run reached t0, otherwise alpha_-(T) carried down
    /// to t0 with the linear growth rate of each free direction.
    Vec target(const ShootingOutcome& o) const;
    /// Mode coefficients of the candidate member at S for a given b.
    Vec coefficients(const Vec& b) const;

    /// Integrates the candidate for `a` and reports the exit data. The run
    /// stops at the exit unless stop_on_exit is false. When `nodes` is given,
    /// every node reached is recorded there.
    ShootingOutcome exit_time_map(const Vec& a, FamilyTrajectory* nodes = nullptr, bool stop_on_exit = true) const;

private:
    const DeviationModel& model_;
    const ConstructionConfig& cfg_;
    double sigma_, S_, rho_, w_rate_;
    int j_;
    std::vector<int> free_;
    std::shared_ptr<const FamilyTrajectory> prev_;
    TimeGrid tg_;
    DeviationIntegrator integ_;
};

struct StageReport {
    int j = 0;
    double S = 0.0;
    ShootingOutcome outcome;
    int runs = 0;
    std::string method;
};

/// Searches a with T(a) = t0 and alpha_-(t0) = 0: bisection in one dimension,
/// damped fixed point plus chord Newton otherwise, grid scan as fallback.
StageReport find_a(const StageContext& ctx, const ConstructionConfig& cfg);

struct MultiResult {
    FieldState U_t0;
    Vec S;
    std::vector<std::vector<StageReport>> stages;  ///< per S_n, stages 0..N
    Vec stabilization;
    double max_stabilization = 0.0;
    FamilyTrajectory base, member;                  ///< Phi_0 and the final member, largest S_n
    double sigma = 0.0;
};

/// Full N-soliton family construction over the schedule.
MultiResult construct_multi(const ConstructionConfig& cfg,
                            const std::vector<std::shared_ptr<const SpectralBundle>>& bundles,
                            const GroundState& gs);

}  // namespace nlkg
