#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nlkg/profiles.hpp"

using namespace nlkg;

namespace {

double trapz(const Vec& v, const Grid& g) {
    double s = 0.0;
    for (double x : v) s += x;
    return s * g.h();
}

}  // namespace

TEST_CASE("cubic ground state matches sqrt2 sech") {
    GroundState gs(Nonlinearity::power(3.0));
    CHECK(gs.Q(0.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    // Q'' = Q - Q^3 at the peak.
    CHECK(gs.d2Q(0.0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-14));
    for (double x : {0.3, 1.0, 4.0, 12.0}) {
        double s = 1.0 / std::cosh(x);
        CHECK(gs.Q(x) == doctest::Approx(std::sqrt(2.0) * s).epsilon(1e-13));
        CHECK(gs.dQ(x) == doctest::Approx(-std::sqrt(2.0) * s * std::tanh(x)).epsilon(1e-13));
        CHECK(gs.Q(-x) == gs.Q(x));
    }
}

TEST_CASE("sech integrals on the grid") {
    // int 2 sech^2 = 4, int 4 sech^4 = 16/3, int 2 sech^2 tanh^2 = 4/3.
    Grid g{30.0, 1024};
    GroundState gs(Nonlinearity::power(3.0));
    Vec q = ground_state(gs, g), q2(g.n), q4(g.n), dq2(g.n);
    for (int i = 0; i < g.n; ++i) {
        q2[i] = q[i] * q[i];
        q4[i] = q2[i] * q2[i];
        double d = gs.dQ(g.x(i));
        dq2[i] = d * d;
    }
    CHECK(trapz(q2, g) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(trapz(q4, g) == doctest::Approx(16.0 / 3.0).epsilon(1e-12));
    CHECK(trapz(dq2, g) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(ground_state_residual(q, Nonlinearity::power(3.0), g) < 5e-3);  // O(h^2) stencil
}

TEST_CASE("power-law peak height") {
    // Q(0) = ((p+1)/2)^{1/(p-1)}.
    for (double p : {2.5, 3.0, 5.0, 7.0}) {
        GroundState gs(Nonlinearity::power(p));
        CHECK(gs.Q(0.0) == doctest::Approx(std::pow((p + 1.0) / 2.0, 1.0 / (p - 1.0))).epsilon(1e-13));
    }
}

TEST_CASE("custom nonlinearity reproduces the closed form") {
    auto nl = Nonlinearity::custom([](double u) { return u * u * u; }, [](double u) { return 3.0 * u * u; },
                                   [](double u) { return 6.0 * u; });
    GroundState shot(nl), exact(Nonlinearity::power(3.0));
    for (double x : {0.0, 0.5, 2.0, 6.0})
        CHECK(shot.Q(x) == doctest::Approx(exact.Q(x)).epsilon(1e-6).scale(1e-8));
    CHECK(shot.tail_rate() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("custom nonlinearity must be odd") {
    CHECK_THROWS_AS(Nonlinearity::custom([](double u) { return u * u; }, [](double u) { return 2.0 * u; },
                                         [](double) { return 2.0; }),
                    ConfigError);
}

TEST_CASE("cancellation-free increments agree with direct differences") {
    Nonlinearity nl = Nonlinearity::power(3.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int k = 0; k < 200; ++k) {
        double s = U(rng), d = U(rng) * 1e-3;
        CHECK(nl.diff(s, d) == doctest::Approx(nl.f(s + d) - nl.f(s)).epsilon(1e-9).scale(1e-14));
        CHECK(nl.incr(s, d) == doctest::Approx(3.0 * s * d * d + d * d * d).epsilon(1e-12));
    }
    // Tiny d: incr must equal 3 s d^2 + d^3, which the direct form loses.
    CHECK(nl.incr(1.0, 1e-12) == doctest::Approx(3e-24).epsilon(1e-10));
}

TEST_CASE("boost places the peak at x0 + beta t") {
    Grid g{40.0, 2048};
    GroundState gs(Nonlinearity::power(3.0));
    SolitonSpec spec{0.6, -10.0};
    FieldState s = boost(gs, spec, 5.0, g);
    int imax = 0;
    for (int i = 1; i < g.n; ++i)
        if (s.u1[i] > s.u1[imax]) imax = i;
    CHECK(std::fabs(g.x(imax) - spec.center(5.0)) <= g.h());
    // u2 = -beta gamma Q'(gamma (x - c)).
    double gam = spec.gamma();
    double x = g.x(imax + 10);
    CHECK(s.u2[imax + 10] ==
          doctest::Approx(-0.6 * gam * gs.dQ(gam * (x - spec.center(5.0)))).epsilon(1e-12));
}

TEST_CASE("wrap_periodic picks the minimum image") {
    CHECK(wrap_periodic(45.0, 40.0) == doctest::Approx(-35.0));
    CHECK(wrap_periodic(-41.0, 40.0) == doctest::Approx(39.0));
    CHECK(wrap_periodic(3.0, 40.0) == doctest::Approx(3.0));
}

TEST_CASE("snapshot records round trip bit for bit") {
    Grid g{12.5, 64};
    FieldState s(g.n, 3.25);
    for (int i = 0; i < g.n; ++i) {
        s.u1[i] = std::sin(0.1 * i) * 1e-300;
        s.u2[i] = std::cos(0.3 * i);
    }
    std::stringstream ss;
    write_snapshot(ss, s, g);
    write_snapshot(ss, s, g);
    Grid back;
    FieldState a = read_snapshot(ss, "mem", &back);
    FieldState b = read_snapshot(ss, "mem");
    CHECK(back == g);
    CHECK(a.t == 3.25);
    CHECK(a.u1 == s.u1);
    CHECK(b.u2 == s.u2);
}

TEST_CASE("snapshot reader rejects foreign data") {
    std::stringstream ss("NOT A SNAPSHOT AT ALL");
    CHECK_THROWS_AS(read_snapshot(ss, "junk"), ConfigError);
}

TEST_CASE("grid and spec validation") {
    CHECK_THROWS_AS((Grid{40.0, 7}.validate()), ConfigError);
    CHECK_THROWS_AS((Grid{-1.0, 64}.validate()), ConfigError);
    CHECK_THROWS_AS((SolitonSpec{1.0, 0.0}.validate()), ConfigError);
    CHECK_NOTHROW((SolitonSpec{-0.9, 3.0}.validate()));
}
