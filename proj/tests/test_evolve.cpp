#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nlkg/evolve.hpp"
#include "nlkg/spectral.hpp"

using namespace nlkg;

namespace {

struct Setup {
    Nonlinearity nl = Nonlinearity::power(3.0);
    GroundState gs{nl};
    Grid g{30.0, 256};
    SolitonSpec spec{0.5, -3.0};
};

}  // namespace

TEST_CASE_FIXTURE(Setup, "both schemes are time symmetric") {
    for (Scheme sc : {Scheme::Leapfrog, Scheme::StrangSpectral}) {
        SolverConfig c;
        c.scheme = sc;
        Stepper st(g, nl, c);
        FieldState s0 = boost(gs, spec, 0.0, g), s = s0;
        for (int k = 0; k < 50; ++k) st.step(s);
        for (int k = 0; k < 50; ++k) st.step(s, -st.dt());
        CHECK(energy_norm(s - s0, g) < 1e-11);
    }
}

TEST_CASE_FIXTURE(Setup, "traveling soliton stays a traveling soliton") {
    SolverConfig c;
    c.dt = 0.002;
    auto [s, rec] = evolve_to(boost(gs, spec, 0.0, g), 2.0, g, nl, c);
    CHECK(s.t == doctest::Approx(2.0));
    CHECK(energy_norm(s - boost(gs, spec, 2.0, g), g) < 1e-4);
}

TEST_CASE_FIXTURE(Setup, "energy and momentum are conserved") {
    Fourier fft(g);
    SolverConfig c;
    c.scheme = Scheme::Leapfrog;
    c.dt = 0.01;
    Stepper st(g, nl, c);
    FieldState s = boost(gs, spec, 0.0, g);
    const double E0 = energy(s, nl, fft), P0 = momentum(s, fft);
    // Closed forms for the boosted cubic soliton: E = (4/3) gamma, P = -(4/3) gamma beta.
    const double gam = spec.gamma();
    CHECK(E0 == doctest::Approx(4.0 / 3.0 * gam).epsilon(1e-9));
    CHECK(P0 == doctest::Approx(-4.0 / 3.0 * gam * 0.5).epsilon(1e-9));
    for (int k = 0; k < 300; ++k) st.step(s);
    CHECK(std::fabs(energy(s, nl, fft) - E0) < 1e-8 * E0);
    CHECK(std::fabs(momentum(s, fft) - P0) < 1e-8);
}

TEST_CASE_FIXTURE(Setup, "second order in dt") {
    Fourier fft(g);
    FieldState exact = boost(gs, spec, 1.0, g);
    double prev = 0.0;
    for (double dt : {0.02, 0.01}) {
        SolverConfig c;
        c.dt = dt;
        auto [s, rec] = evolve_to(boost(gs, spec, 0.0, g), 1.0, g, nl, c);
        double err = energy_norm(s - exact, fft);
        if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.15));
        prev = err;
    }
}

TEST_CASE_FIXTURE(Setup, "backward evolution inverts forward evolution") {
    SolverConfig c;
    FieldState s0 = boost(gs, spec, 0.0, g);
    auto [fwd, r1] = evolve_to(s0, 3.0, g, nl, c);
    auto [back, r2] = evolve_to(fwd, 0.0, g, nl, c);
    CHECK(back.t == doctest::Approx(0.0).scale(1e-12));
    CHECK(energy_norm(back - s0, g) < 1e-9);
}

TEST_CASE_FIXTURE(Setup, "blow-up is reported as a numerical failure") {
    SolverConfig c;
    FieldState big = boost(gs, spec, 0.0, g);
    for (double& v : big.u1) v *= 3.0;
    CHECK_THROWS_AS(evolve_to(big, 50.0, g, nl, c), NumericalError);
}

TEST_CASE("scheme and boundary names") {
    CHECK(parse_scheme("leapfrog") == Scheme::Leapfrog);
    CHECK(parse_scheme(to_string(Scheme::StrangSpectral)) == Scheme::StrangSpectral);
    CHECK(parse_boundary(to_string(Boundary::DirichletPad)) == Boundary::DirichletPad);
    CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
}

TEST_CASE("solver config limits") {
    Grid g{20.0, 128};
    SolverConfig c;
    c.scheme = Scheme::Leapfrog;
    c.dt = 10.0;
    CHECK_THROWS_AS(c.validate(g), ConfigError);
    c.scheme = Scheme::StrangSpectral;
    c.dt = 0.0;
    CHECK(c.step_size(g) == doctest::Approx(0.5 * g.h()));
    c.horizon = -1.0;
    CHECK_THROWS_AS(c.validate(g), ConfigError);
}

TEST_CASE("trajectory records survive CSV") {
    TrajectoryRecord r;
    r.add_sample(0.0, {{"a", 1.0}, {"b", 1e-300}});
    r.add_sample(0.5, {{"a", 0.1}, {"b", -2.5}});
    CHECK_THROWS(r.add_sample(0.25, {{"a", 0.0}, {"b", 0.0}}));
    auto path = (std::filesystem::temp_directory_path() / "nlkg_record.csv").string();
    r.write_csv(path);
    TrajectoryRecord back = TrajectoryRecord::read_csv(path);
    CHECK(back.times() == r.times());
    CHECK(back.series("b") == r.series("b"));
    std::filesystem::remove(path);
}
