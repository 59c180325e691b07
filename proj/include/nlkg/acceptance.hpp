#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlkg/construct.hpp"

namespace nlkg {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string summary;   ///< one line of measured values
    double seconds = 0.0;
    nlohmann::json details;
};

struct AcceptanceOptions {
    Nonlinearity nl = Nonlinearity::power(3.0);
    Grid spectral_grid{40.0, 2048};  ///< criteria 1-3
    Grid solver_grid{40.0, 1024};    ///< criterion 4
    Grid single_grid{40.0, 2048};    ///< criteria 5-6
    Grid multi_grid{48.0, 2048};     ///< criteria 7-9
    std::vector<int> only;           ///< empty runs all ten
    int threads = 0;
    std::uint64_t seed = 0;
};

/// One line per criterion: "PASS [k] title: summary (time)".
std::string format_result(const CriterionResult& r);

/// Runs the selected criteria in order and reports each one as soon as it is
/// decided. Exceptions inside a criterion mark it failed with the message.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// Machine-readable summary of a suite run.
nlohmann::json acceptance_summary(const std::vector<CriterionResult>& results);

}  // namespace nlkg
