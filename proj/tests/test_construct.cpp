#include <doctest.h>

#include <cmath>

#include "nlkg/construct.hpp"

using namespace nlkg;

namespace {

struct Single {
    Nonlinearity nl = Nonlinearity::power(3.0);
    GroundState gs{nl};
    Grid g{40.0, 1024};
    SolitonSpec spec{0.5, -7.5};
    std::shared_ptr<const SpectralBundle> bundle;

    Single() {
        EigenPair ep = ground_eigenpair(nl, gs, g);
        GroundMode mode(ep, gs);
        bundle = std::make_shared<SpectralBundle>(boosted_pairs(mode, gs, spec.beta, g));
    }

    ConstructionConfig config() const {
        ConstructionConfig c;
        c.t0 = 5.0;
        c.schedule = {9.0, 13.0};
        c.threads = 1;
        return c;
    }
};

}  // namespace

TEST_CASE("default schedule") {
    Vec s = ConstructionConfig::default_schedule(5.0);
    CHECK(s == Vec{9.0, 13.0, 17.0, 21.0, 25.0});
    CHECK(ConstructionConfig::default_schedule(2.0, 2) == Vec{6.0, 10.0});
}

TEST_CASE("sigma formula for the two-soliton benchmark") {
    // (1/16) min{e_1, gamma_2 |beta_1 - beta_2|} with e_1 = sqrt(3 (1 - 0.64)).
    std::vector<SolitonSpec> specs{{0.8, -8.0}, {0.4, -16.0}};
    Vec rates{std::sqrt(3.0 * 0.36), std::sqrt(3.0 * 0.84)};
    double expect = std::min(rates[0], 0.4 / std::sqrt(1.0 - 0.16)) / 16.0;
    CHECK(ConstructionConfig::sigma_formula(specs, rates) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(expect == doctest::Approx(0.0272772).epsilon(1e-5));
}

TEST_CASE("construction config validation") {
    ConstructionConfig c;
    c.specs = {{0.4, -8.0}, {0.8, -16.0}};
    c.A = {1.0, 1.0};
    c.schedule = {9.0};
    CHECK_THROWS_AS(c.validate({1.0, 1.5}), ConfigError);  // |beta| must decrease
    c.specs = {{0.8, -8.0}, {0.4, -16.0}};
    CHECK_NOTHROW(c.validate({1.0, 1.5}));
    c.A = {1.0};
    CHECK_THROWS_AS(c.validate({1.0, 1.5}), ConfigError);
    c.A = {1.0, 1.0};
    c.schedule = {4.0};
    CHECK_THROWS_AS(c.validate({1.0, 1.5}), ConfigError);
}

TEST_CASE_FIXTURE(Single, "final data carries the unstable mode") {
    FieldState U = final_data_single(spec, 2.0, 9.0, *bundle, gs);
    FieldState R = boost(gs, spec, 9.0, g);
    Fourier fft(g);
    FieldState Yp = bundle->at(SpectralBundle::Profile::Yp, spec.center(9.0), fft);
    FieldState expect = R;
    axpy(2.0 * std::exp(-bundle->e * 9.0), Yp, expect);
    CHECK(energy_norm(U - expect, g) < 1e-14);
}

TEST_CASE_FIXTURE(Single, "A = 0 gives the soliton itself") {
    ConstructionConfig c = config();
    SingleResult r = construct_single(spec, 0.0, c, bundle, gs);
    CHECK(energy_norm(r.U_t0 - boost(gs, spec, c.t0, g), g) < 1e-12);
    for (double v : r.residual.series("r")) CHECK(v < 1e-12);
}

TEST_CASE_FIXTURE(Single, "single construction is deterministic and stabilizes") {
    ConstructionConfig c = config();
    SingleResult a = construct_single(spec, 1.0, c, bundle, gs);
    SingleResult b = construct_single(spec, 1.0, c, bundle, gs);
    CHECK(a.U_t0.u1 == b.U_t0.u1);
    CHECK(a.U_t0.u2 == b.U_t0.u2);
    REQUIRE(a.stabilization.size() == 1);
    CHECK(a.stabilization[0] < 1e-6);
    // U - R at t0 is dominated by the mode A e^{-e t0} Y+.
    Fourier fft(g);
    FieldState mode = bundle->at(SpectralBundle::Profile::Yp, spec.center(c.t0), fft);
    double amp = std::exp(-bundle->e * c.t0) * energy_norm(mode, g);
    double dev = energy_norm(a.U_t0 - boost(gs, spec, c.t0, g), g);
    CHECK(dev == doctest::Approx(amp).epsilon(0.05));
}

TEST_CASE_FIXTURE(Single, "thread count does not change the result") {
    ConstructionConfig c = config();
    SingleResult a = construct_single(spec, 1.0, c, bundle, gs);
    c.threads = 2;
    SingleResult b = construct_single(spec, 1.0, c, bundle, gs);
    CHECK(a.U_t0.u1 == b.U_t0.u1);
    CHECK(a.stabilization == b.stabilization);
}

TEST_CASE("modulation matrix is close to the identity for separated solitons") {
    Nonlinearity nl = Nonlinearity::power(3.0);
    GroundState gs(nl);
    Grid g{48.0, 2048};
    EigenPair ep = ground_eigenpair(nl, gs, g);
    GroundMode mode(ep, gs);
    std::vector<SolitonSpec> specs{{0.8, -8.0}, {0.4, -16.0}};
    std::vector<std::shared_ptr<const SpectralBundle>> bundles;
    for (const auto& s : specs) bundles.push_back(std::make_shared<SpectralBundle>(boosted_pairs(mode, gs, s.beta, g)));
    DeviationModel model(g, gs, specs, bundles);
    Vec a{1e-4, -2e-4};
    ModulationSolve ms = solve_modulation_b(a, 13.0, model, {0, 1});
    CHECK(ms.psi_deviation < 1e-3);
    CHECK(ms.bound_ok);
    CHECK(ms.b[0] == doctest::Approx(a[0]).epsilon(1e-2));
    CHECK(ms.b[1] == doctest::Approx(a[1]).epsilon(1e-2));
}
