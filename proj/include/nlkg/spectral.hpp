#pragma once

#include <Eigen/Dense>

#include "nlkg/fourier.hpp"
#include "nlkg/profiles.hpp"

namespace nlkg {

/// <U, V> = int (u1 v1 + u2 v2) by the periodic trapezoid rule.
double inner_product(const FieldState& a, const FieldState& b, const Grid& grid);
double inner_product(const Vec& a, const Vec& b, const Grid& grid);
/// (||u1||_{H^1}^2 + ||u2||_{L^2}^2)^{1/2}, spectral derivative.
double energy_norm(const FieldState& u, const Grid& grid);
double energy_norm(const FieldState& u, const Fourier& fft);
/// L^2 norm of both components.
double l2_norm(const FieldState& u, const Grid& grid);

enum class OperatorKind { L, H, Hcal, J };

/// Dense discretization of one of the linearized operators. Pair operators act
/// on stacked vectors (u1[0..n), u2[0..n)).
struct OperatorMatrix {
    OperatorKind kind = OperatorKind::L;
    Grid grid;
    double beta = 0.0;
    Eigen::MatrixXd M;
};

/// Fourier differentiation matrices consistent with Fourier::derivative and
/// Fourier::second_derivative (D1 skew, D2 symmetric).
Eigen::MatrixXd spectral_d1_matrix(const Grid& grid);
Eigen::MatrixXd spectral_d2_matrix(const Grid& grid);

/// L = -d^2 + 1 - f'(q) for a sampled profile q (q = Q gives L, q = Q_beta gives L_beta).
OperatorMatrix build_L(const Nonlinearity& nl, const Vec& q, const Grid& grid);
/// H_beta = [[L_beta, -beta d], [beta d, 1]] with q = Q_beta samples.
OperatorMatrix build_H(const Nonlinearity& nl, const Vec& q_beta, double beta, const Grid& grid);
/// The first-order operator assembled block by block: [[-beta d, -L_beta], [1, -beta d]].
OperatorMatrix build_Hcal(const Nonlinearity& nl, const Vec& q_beta, double beta, const Grid& grid);
OperatorMatrix build_J(const Grid& grid);

/// Applies the first-order operator with FFT derivatives.
FieldState apply_Hcal(const FieldState& z, const Nonlinearity& nl, const Vec& q_beta, double beta,
                      const Fourier& fft);
/// Applies H_beta with FFT derivatives.
FieldState apply_H(const FieldState& v, const Nonlinearity& nl, const Vec& q_beta, double beta,
                   const Fourier& fft);

struct EigenPair {
    double lambda0 = 0.0;     ///< -lambda0 is the negative eigenvalue of L
    Vec Y0;                   ///< unit L^2 norm, Y0(0) > 0
    double residual = 0.0;    ///< ||L Y0 + lambda0 Y0|| / lambda0
    Vec lowest;               ///< lowest few eigenvalues, ascending
    std::vector<Vec> vectors; ///< matching eigenvectors (unit L^2 norm)
    Grid grid;
};

/// Lowest `count` eigenpairs of a symmetric L by a partial dense solve.
EigenPair ground_eigenpair(const OperatorMatrix& L, int count = 3);
/// Convenience driver: dense solve for n <= 4096, otherwise a coarse dense solve
/// refined by shifted inverse iteration (CG with FFT-applied L) on the target grid.
EigenPair ground_eigenpair(const Nonlinearity& nl, const GroundState& gs, const Grid& grid);

/// Y0 at arbitrary arguments. Inside |y| <= y_patch the dense eigenvector is
/// interpolated by its trigonometric series; further out the tail is carried in
/// log form from the Riccati equation for Y0'/Y0, which keeps exponentially
/// weighted products accurate.
class GroundMode {
public:
    GroundMode(const EigenPair& ep, const GroundState& gs, double patch_level = 1e-2);

    double lambda0() const { return lambda0_; }
    double patch_point() const { return y_patch_; }
    /// exp(a y) Y0(y) and its y-derivative.
    void weighted(double y, double a, double* value, double* deriv) const;
    double value(double y) const;

private:
    double lambda0_;
    Grid eg_;
    std::vector<cplx> coef_;
    double y_patch_ = 0.0;
    double tail_h_ = 0.0, tail_far_ = 0.0, tail_rate_ = 0.0;
    Vec ell_, w_, dw_;  // log Y0, Y0'/Y0 and its derivative on [y_patch, tail_far]
    void trig_eval(double y, double* v, double* d) const;
    void tail_eval(double ay, double* ell, double* w) const;
};

struct BundleOptions {
    double residual_tol = 1e-8;
    double orth_tol = 1e-10;
};

/// Eigen-objects of one boosted soliton, sampled centered at x = 0 on the
/// simulation grid. Moving copies are obtained with `at`.
struct SpectralBundle {
    Grid grid;
    double beta = 0.0, gamma = 1.0, lambda0 = 0.0, e = 0.0;
    double kappa = 0.0;   ///< Y+ = kappa J Z+
    double scale = 1.0;   ///< common factor applied to Z+-
    double nu = 0.0;      ///< Y+_ko = Y+ + nu J Z0
    FieldState Zp, Zm, Yp, Ym, Z0, dR, R;
    FieldState Yp_ko, Ym_ko;  ///< variants that are also orthogonal to J Z0
    Vec Qb;                   ///< Q_beta samples (centered)
    double res_plus = 0.0, res_minus = 0.0, res_kernel = 0.0;
    double mu = 0.0;          ///< filled by coercivity_mu when requested

    enum class Profile { Zp, Zm, Yp, Ym, Z0, dR, R };
    const FieldState& centered(Profile p) const;
    /// Profile translated so its center sits at `center`.
    FieldState at(Profile p, double center, const Fourier& fft) const;
};

SpectralBundle boosted_pairs(const GroundMode& mode, const GroundState& gs, double beta,
                             const Grid& grid, const BundleOptions& opts = {});

/// Smallest generalized Rayleigh quotient <H V, V> / ||V||^2_{H^1 x L^2} over the
/// discrete subspace orthogonal to {Z+, Z-, J Z0}. Throws if not positive.
double coercivity_mu(const SpectralBundle& bundle, const OperatorMatrix& H);

/// Discrete H^1 x L^2 Gram matrix (without the h weight), matching coercivity_mu.
Eigen::MatrixXd energy_gram(const Grid& grid);

}  // namespace nlkg
