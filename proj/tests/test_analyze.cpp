#include <doctest.h>

#include <cmath>
#include <random>

#include "nlkg/analyze.hpp"

using namespace nlkg;

TEST_CASE("fit_rate recovers an exact exponential") {
    Vec t, v;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(0.5 * i);
        v.push_back(3.0 * std::exp(-1.7 * t.back()));
    }
    RateFit f = fit_rate(t, v, 2.0, 18.0);
    CHECK(f.rate == doctest::Approx(-1.7).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(f.samples == 33);
}

TEST_CASE("fit_rate is scale invariant (property)") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        Vec t, v, w;
        const double scale = std::exp(20.0 * (U(rng) - 0.5));
        for (int i = 0; i < 30; ++i) {
            t.push_back(i * 0.3);
            v.push_back(std::exp(-2.0 * t.back() + 0.1 * std::sin(7.0 * t.back() + trial)));
            w.push_back(scale * v.back());
        }
        RateFit a = fit_rate(t, v, 0.0, 10.0), b = fit_rate(t, w, 0.0, 10.0);
        CHECK(a.rate == doctest::Approx(b.rate).epsilon(1e-9));
        CHECK(a.r2 == doctest::Approx(b.r2).epsilon(1e-9));
    }
}

TEST_CASE("fit_rate rejects bad input") {
    Vec t{0, 1, 2, 3, 4, 5}, v{1, 1, 0, 1, 1, 1};
    CHECK_THROWS_AS(fit_rate(t, v, 0.0, 5.0), NumericalError);
    CHECK_THROWS_AS(fit_rate(t, Vec(6, 1.0), 0.0, 2.0), NumericalError);  // three samples
    CHECK_THROWS_AS(fit_rate(t, Vec(5, 1.0), 0.0, 5.0), NumericalError);
}

TEST_CASE("arctan cut-off") {
    CHECK(cutoff_psi(0.0) == doctest::Approx(0.5));
    CHECK(cutoff_psi(-40.0) == doctest::Approx(1.0));
    CHECK(cutoff_psi(40.0) == doctest::Approx(0.0).scale(1e-12));
    // psi(x) + psi(-x) = 1.
    for (double x : {0.1, 1.0, 3.0}) CHECK(cutoff_psi(x) + cutoff_psi(-x) == doctest::Approx(1.0));
}

TEST_CASE("cut-offs form a partition of unity (property)") {
    Grid g{60.0, 600};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-0.9, 0.9), X(-20.0, 20.0), T(0.5, 30.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SolitonSpec> specs;
        for (int k = 0; k < 1 + trial % 4; ++k) specs.push_back({U(rng), X(rng)});
        auto phi = cutoff_psi_phi(T(rng), g, specs);
        for (int i = 0; i < g.n; ++i) {
            double s = 0.0;
            for (const auto& p : phi) {
                CHECK(p[i] >= -1e-14);
                s += p[i];
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("chi profile is continuous with plateaus at the solitons") {
    std::vector<SolitonSpec> specs{{0.8, -8.0}, {0.4, -16.0}, {-0.2, -20.0}};
    const double t = 10.0, delta = 0.1;
    double prev = chi_profile(t, -60.0, delta, specs).value;
    double max_jump = 0.0;
    for (double x = -60.0; x <= 60.0; x += 1e-3) {
        double v = chi_profile(t, x, delta, specs).value;
        max_jump = std::max(max_jump, std::fabs(v - prev));
        prev = v;
    }
    CHECK(max_jump < 1e-3);
    for (const auto& s : specs) CHECK(chi_profile(t, s.center(t), delta, specs).value == doctest::Approx(s.beta));
    auto ramps = omega_intervals(t, delta, specs);
    CHECK(ramps.size() == 2);
    for (auto [a, b] : ramps) CHECK(a < b);
    CHECK_THROWS_AS(chi_profile(t, 0.0, 0.3, specs), ConfigError);
}

TEST_CASE("default delta") {
    CHECK(default_delta({{0.5, 0.0}}) == doctest::Approx(0.1));
    // gaps 0.4 and 0.2: min / (4 max) = 0.125 > 0.1.
    CHECK(default_delta({{0.8, 0.0}, {0.4, -5.0}, {0.2, -9.0}}) == doctest::Approx(0.1));
    // gaps 0.6 and 0.1: 0.1 / 2.4.
    CHECK(default_delta({{0.8, 0.0}, {0.2, -5.0}, {0.1, -9.0}}) == doctest::Approx(0.1 / 2.4));
}

TEST_CASE("plateau extraction") {
    Vec t, a;
    const double e = 1.2, A = -0.5;
    for (int i = 0; i <= 60; ++i) {
        t.push_back(5.0 + 0.25 * i);
        a.push_back(A * std::exp(-e * t.back()) * (1.0 + std::exp(-2.0 * t.back())));
    }
    Plateau p = extract_A(t, a, e, 1e-12);
    CHECK(p.value == doctest::Approx(A).epsilon(1e-6));
    // A drifting amplitude is rejected.
    for (size_t i = 0; i < a.size(); ++i) a[i] *= std::exp(0.2 * t[i]);
    CHECK_THROWS_AS(extract_A(t, a, e, 1e-12), NumericalError);
}

TEST_CASE("decay verifier") {
    Vec t, fast, slow;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.2 * i);
        fast.push_back(std::exp(-2.0 * t.back() + 0.3 * std::sin(t.back()) / (1.0 + t.back())));
        slow.push_back(std::exp(-1.5 * t.back()));
    }
    CHECK(verify_decay(t, fast, 2.0).passed);
    DecayCheck d = verify_decay(t, slow, 2.0);
    CHECK_FALSE(d.passed);
    CHECK(d.xi_integral == doctest::Approx(0.5 * 20.0).epsilon(1e-9));
    CHECK_THROWS_AS(verify_decay(Vec(5, 1.0), Vec(5, 1.0), 1.0), NumericalError);
}

TEST_CASE("monotonicity check on an exactly monotone functional") {
    // F = t^{-lambda} e^{-t} makes D = -F' - (lambda/t) F = F, which the
    // envelope term e^{-gamma t} ||Z||^2 with ||Z||^2 = t^{-lambda} covers.
    // ||Z|| is kept small so the cubic term stays out of the way. A sudden
    // drop of F on the check half must be flagged.
    const double lambda = 2.0, gamma = 1.0;
    Vec t, F, ap, Z;
    for (int i = 0; i < 80; ++i) {
        double s = 2.0 + 0.1 * i;
        t.push_back(s);
        F.push_back(std::pow(s, -lambda) * std::exp(-s));
        ap.push_back(0.0);
        Z.push_back(1e-3 * std::pow(s, -lambda / 2.0));
    }
    MonotonicityReport r = check_monotonicity(t, F, ap, Z, lambda, gamma);
    CHECK(r.passed);
    CHECK(r.violations == 0);
    CHECK(r.c2 == doctest::Approx(1e6).epsilon(0.02));

    Vec G = F;
    for (size_t i = 60; i < t.size(); ++i) G[i] = 0.1 * F[i];
    CHECK_FALSE(check_monotonicity(t, G, ap, Z, lambda, gamma).passed);
}
