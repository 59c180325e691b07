#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "nlkg/construct.hpp"

namespace nlkg {

struct SpectrumConfig {
    Vec betas;  ///< empty: the construction velocities, or beta = 0 without any
    bool coercivity = false;
};

/// One parameter varied over a list of values; each value gets its own run.
struct SweepConfig {
    std::string parameter;               ///< JSON pointer into the config, e.g. "/construction/A/0"
    std::vector<nlohmann::json> values;  ///< replacement values, applied one at a time

    bool empty() const { return parameter.empty(); }
};

struct ExperimentConfig {
    Nonlinearity nonlinearity = Nonlinearity::power(3.0);
    Grid grid{40.0, 2048};
    SolverConfig solver;
    SpectrumConfig spectrum;
    ConstructionConfig construction;
    AnalysisConfig analysis;
    SweepConfig sweep;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    /// Reads TOML (by default) or JSON (.json extension). Unknown keys,
    /// wrong types and failed cross-field checks raise ConfigError naming the
    /// offending field.
    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_toml(const std::string& text, const std::string& origin = "<string>");
    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& origin = "<json>");

    nlohmann::json to_json() const;
    /// crc32 of the canonical JSON dump, as 8 hex digits.
    std::string hash() const;

    /// Multiplies n by `mult` (rounded to an even count) and leaves every
    /// physical length unchanged.
    void apply_resolution(double mult);

    /// Cross-field checks: schedule within the solver horizon, soliton
    /// centers inside the box over [t0, max S_n], ordering of the velocities.
    void validate() const;

    /// Sweep member k: this config with sweep.values[k] written at
    /// sweep.parameter, re-validated, and without the sweep section.
    ExperimentConfig sweep_member(size_t k) const;

    /// Velocities the spectrum command reports on.
    Vec spectrum_betas() const;
};

/// Worker count after applying the NLKG_THREADS cap to `requested`
/// (0 = available parallelism).
int threads_from_env(int requested = 0);

}  // namespace nlkg
