#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "nlkg/spectral.hpp"

using namespace nlkg;

namespace {

// Three-point finite differences for -d^2 + 1 - 6 sech^2 on a box, lowest
// eigenvalue. Independent of the spectral discretization in the library.
double fd_lowest(double L, int n) {
    const double h = 2.0 * L / n;
    Eigen::VectorXd d(n), e(n - 1);
    for (int i = 0; i < n; ++i) {
        double s = 1.0 / std::cosh(-L + i * h);
        d(i) = 2.0 / (h * h) + 1.0 - 6.0 * s * s;
    }
    e.setConstant(-1.0 / (h * h));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

struct Fixture {
    Nonlinearity nl = Nonlinearity::power(3.0);
    GroundState gs{nl};
    Grid g{30.0, 768};
    EigenPair ep = ground_eigenpair(nl, gs, g);
    GroundMode mode{ep, gs};
};

}  // namespace

TEST_CASE("finite-difference oracle converges to -3") {
    double a = fd_lowest(20.0, 400), b = fd_lowest(20.0, 800);
    double rich = (4.0 * b - a) / 3.0;
    CHECK(rich == doctest::Approx(-3.0).epsilon(1e-6));
    CHECK(std::fabs(b + 3.0) < std::fabs(a + 3.0));
}

TEST_CASE_FIXTURE(Fixture, "ground eigenpair of L") {
    CHECK(ep.lambda0 == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(ep.residual < 1e-10);
    // Poschl-Teller: second eigenvalue is the translation zero mode.
    REQUIRE(ep.lowest.size() >= 2);
    CHECK(std::fabs(ep.lowest[1]) < 1e-9);
    // Y0 is proportional to sech^2 with unit L^2 norm (int sech^4 = 4/3).
    double c = std::sqrt(3.0 / 4.0);
    for (int i : {300, 384, 440}) {
        double s = 1.0 / std::cosh(g.x(i));
        CHECK(ep.Y0[i] == doctest::Approx(c * s * s).epsilon(1e-8).scale(1e-12));
    }
}

TEST_CASE_FIXTURE(Fixture, "boosted rates follow sqrt(lambda0 (1 - beta^2))") {
    for (double beta : {0.0, 0.3, -0.5, 0.8}) {
        SpectralBundle b = boosted_pairs(mode, gs, beta, g, BundleOptions{1e-6, 1e-8});
        CHECK(b.e == doctest::Approx(std::sqrt(3.0 * (1.0 - beta * beta))).epsilon(1e-9));
        CHECK(b.gamma == doctest::Approx(1.0 / std::sqrt(1.0 - beta * beta)));
    }
}

TEST_CASE_FIXTURE(Fixture, "eigen-directions and their duals") {
    Fourier fft(g);
    SpectralBundle b = boosted_pairs(mode, gs, 0.5, g, BundleOptions{1e-6, 1e-8});
    FieldState Hp = apply_Hcal(b.Zp, nl, b.Qb, 0.5, fft);
    FieldState Hm = apply_Hcal(b.Zm, nl, b.Qb, 0.5, fft);
    CHECK(l2_norm(Hp - b.e * b.Zp, g) / l2_norm(b.Zp, g) < 1e-8);
    CHECK(l2_norm(Hm + b.e * b.Zm, g) / l2_norm(b.Zm, g) < 1e-8);
    CHECK(l2_norm(apply_Hcal(b.Z0, nl, b.Qb, 0.5, fft), g) < 1e-8);
    CHECK(inner_product(b.Yp, b.Zm, g) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(inner_product(b.Ym, b.Zp, g) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::fabs(inner_product(b.Yp, b.Zp, g)) < 1e-10);
    CHECK(std::fabs(inner_product(b.Ym, b.Zm, g)) < 1e-10);
    // The fully constrained duals are also orthogonal to J Z0.
    FieldState JZ0 = apply_J(b.Z0);
    CHECK(std::fabs(inner_product(JZ0, b.Yp_ko, g)) < 1e-9);
    CHECK(inner_product(b.Yp_ko, b.Zm, g) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE_FIXTURE(Fixture, "first-order operator is -H J") {
    Grid small{30.0, 64};
    Vec q = ground_state(gs, small);
    OperatorMatrix H = build_H(nl, q, 0.4, small), Hc = build_Hcal(nl, q, 0.4, small), J = build_J(small);
    Eigen::MatrixXd diff = Hc.M + H.M * J.M;
    CHECK(diff.norm() < 1e-10 * H.M.norm());
}

TEST_CASE("spectral derivative matrices are skew and symmetric") {
    Grid g{5.0, 16};
    Eigen::MatrixXd D1 = spectral_d1_matrix(g), D2 = spectral_d2_matrix(g);
    CHECK((D1 + D1.transpose()).norm() < 1e-12);
    CHECK((D2 - D2.transpose()).norm() < 1e-12);
    // Rows of a derivative annihilate constants.
    CHECK((D2 * Eigen::VectorXd::Ones(g.n)).norm() < 1e-10);
}

TEST_CASE("inner product and norms") {
    Grid g{3.0, 16};
    FieldState a(g.n), b(g.n);
    for (int i = 0; i < g.n; ++i) {
        a.u1[i] = i;
        b.u2[i] = 1.0;
        a.u2[i] = 2.0;
    }
    CHECK(inner_product(a, b, g) == doctest::Approx(2.0 * g.n * g.h()));
    CHECK(inner_product(a, b, g) == inner_product(b, a, g));
    CHECK(energy_norm(FieldState(g.n), g) == 0.0);
}
