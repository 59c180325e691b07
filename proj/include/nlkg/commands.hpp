#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlkg/config.hpp"

namespace nlkg {

/// Command-line knobs shared by every subcommand.
struct CommandOptions {
    std::string config_path;             ///< empty: built-in defaults
    std::string out_dir;                 ///< empty: the config's output_dir
    std::optional<std::uint64_t> seed;
    double resolution = 1.0;             ///< grid refinement factor
    std::string run_dir;                 ///< analyze: construct output to read (default: out_dir)
    std::vector<int> only;               ///< verify: subset of criteria
};

/// Config after the command-line overrides, validated.
ExperimentConfig resolve_config(const CommandOptions& opts);

/// Each command writes into its output directory, registers every file in
/// manifest.json there, and returns an exit code. Config and numerical
/// failures propagate as ConfigError / NumericalError; run_command maps them.
int cmd_spectrum(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);
int cmd_construct(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);
int cmd_analyze(const std::string& run_dir, const ExperimentConfig* override_cfg, const std::string& out,
                std::ostream& log);
int cmd_verify(const ExperimentConfig& cfg, const std::vector<int>& only, const std::string& out, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& out, std::ostream& log);

/// Dispatches by name and converts exceptions into exit codes with a
/// one-line diagnostic on `err`.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace nlkg
