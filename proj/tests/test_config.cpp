#include <doctest.h>

#include <cstdlib>
#include <string>

#include "nlkg/config.hpp"

using namespace nlkg;

namespace {

std::string error_of(const std::string& toml) {
    try {
        ExperimentConfig::from_toml(toml, "t.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

const char* kTwo = R"(
seed = 3
output_dir = "two"
[grid]
half_width = 48.0
n = 2048
[construction]
t0 = 5.0
A = [1.0, -0.5]
[[construction.solitons]]
beta = 0.8
x0 = -8.0
[[construction.solitons]]
beta = 0.4
x0 = -16.0
)";

}  // namespace

TEST_CASE("defaults are valid") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.spectrum_betas() == Vec{0.0});
}

TEST_CASE("TOML config with two solitons") {
    ExperimentConfig c = ExperimentConfig::from_toml(kTwo);
    CHECK(c.seed == 3);
    CHECK(c.grid.half_width == 48.0);
    REQUIRE(c.construction.specs.size() == 2);
    CHECK(c.construction.specs[1].x0 == -16.0);
    CHECK(c.construction.schedule == ConstructionConfig::default_schedule(5.0));
    CHECK(c.spectrum_betas() == Vec{0.8, 0.4});
}

TEST_CASE("unknown keys and wrong types name the field") {
    CHECK(contains(error_of("[grid]\nwidth = 3.0\n"), "grid.width: unknown key"));
    CHECK(contains(error_of("[solver]\ndt = \"fast\"\n"), "solver.dt: expected a number"));
    CHECK(contains(error_of("[grid]\nn = 2.5\n"), "grid.n: expected an integer"));
    CHECK(contains(error_of("[analysis]\nplateau_tolerance = 1e-9\n"), "analysis.plateau_tolerance"));
    CHECK(contains(error_of("[[construction.solitons]]\nbeta = 0.5\nx = 1.0\n"), "construction.solitons[0].x"));
    CHECK(contains(error_of("colour = 1\n"), "colour: unknown key"));
    CHECK(contains(error_of("[grid\nn = 3\n"), "t.toml:1"));
    CHECK(contains(error_of("[solver]\nscheme = \"euler\"\n"), "euler"));
}

TEST_CASE("cross-field checks") {
    // Amplitude count.
    CHECK(contains(error_of("[construction]\nA = [1.0, 2.0]\n[[construction.solitons]]\nbeta = 0.5\n"),
                   "construction.A"));
    // Soliton leaves the box before max S.
    CHECK(contains(error_of("[construction]\nA = [1.0]\n[[construction.solitons]]\nbeta = 0.9\nx0 = 10.0\n"),
                   "leaves the box"));
    // Schedule beyond the solver horizon.
    CHECK(contains(error_of("[solver]\nhorizon = 20.0\n"), "horizon"));
    CHECK(contains(error_of("[analysis]\nlambda_exp = 0.5\n"), "lambda_exp"));
}

TEST_CASE("JSON mirror gives the same config") {
    ExperimentConfig a = ExperimentConfig::from_toml(kTwo);
    ExperimentConfig b = ExperimentConfig::from_json(a.to_json());
    CHECK(a.hash() == b.hash());
    CHECK(a.to_json() == b.to_json());
    nlohmann::json j = a.to_json();
    j["grid"]["bogus"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("hash changes with any field") {
    ExperimentConfig a = ExperimentConfig::from_toml(kTwo), b = a;
    b.construction.A[1] = -0.25;
    CHECK(a.hash() != b.hash());
    CHECK(a.hash().size() == 8);
}

TEST_CASE("sweep members") {
    std::string text = std::string(kTwo) + "[sweep]\nparameter = \"/construction/A/1\"\nvalues = [-0.5, 0.25]\n";
    ExperimentConfig c = ExperimentConfig::from_toml(text);
    REQUIRE(c.sweep.values.size() == 2);
    ExperimentConfig m = c.sweep_member(1);
    CHECK(m.construction.A[1] == 0.25);
    CHECK(m.sweep.empty());
    CHECK(m.output_dir == c.output_dir);
    CHECK_THROWS_AS(c.sweep_member(2), ConfigError);

    c.sweep.parameter = "/construction/typo";
    CHECK_THROWS_AS(c.sweep_member(0), ConfigError);
    c.sweep.parameter = "/grid/n";
    c.sweep.values = {nlohmann::json(7)};
    CHECK_THROWS_AS(c.sweep_member(0), ConfigError);  // odd n fails validation
    CHECK(contains(error_of("[sweep]\nparameter = \"/grid/n\"\n"), "sweep"));
}

TEST_CASE("resolution multiplier") {
    ExperimentConfig c;
    c.construction.dt = 0.02;
    c.apply_resolution(1.5);
    CHECK(c.grid.n == 3072);
    CHECK(c.construction.dt == doctest::Approx(0.02 / 1.5));
    CHECK(c.grid.half_width == 40.0);
    CHECK_THROWS_AS(c.apply_resolution(0.0), ConfigError);
}

TEST_CASE("NLKG_THREADS caps the worker count") {
    ::setenv("NLKG_THREADS", "3", 1);
    CHECK(threads_from_env(0) == 3);
    CHECK(threads_from_env(8) == 3);
    CHECK(threads_from_env(2) == 2);
    ::setenv("NLKG_THREADS", "zero", 1);
    CHECK(threads_from_env(5) == 5);
    ::unsetenv("NLKG_THREADS");
    CHECK(threads_from_env(0) == 0);
}
