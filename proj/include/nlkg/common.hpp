#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nlkg {

using Vec = std::vector<double>;

/// Bad user input: malformed config, invalid parameters, unknown keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Blow-up, non-convergence, singular systems and similar runtime failures.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Process exit codes shared by the CLI and the acceptance runner.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitNumerical = 3,
    kExitAcceptance = 4,
};

}  // namespace nlkg
