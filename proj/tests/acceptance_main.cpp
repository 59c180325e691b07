// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// restrict the run to the listed criterion numbers.
#include <cstdlib>
#include <iostream>

#include "nlkg/acceptance.hpp"
#include "nlkg/config.hpp"

int main(int argc, char** argv) {
    nlkg::AcceptanceOptions opts;
    for (int i = 1; i < argc; ++i) opts.only.push_back(std::atoi(argv[i]));
    opts.threads = nlkg::threads_from_env(0);
    auto results = nlkg::run_acceptance(
        opts, [](const nlkg::CriterionResult& r) { std::cout << nlkg::format_result(r) << std::endl; });
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
    return failed ? nlkg::kExitAcceptance : nlkg::kExitOk;
}
