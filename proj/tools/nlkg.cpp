#include <iostream>

#include <CLI11.hpp>

#include "nlkg/commands.hpp"
#include "nlkg/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Backward construction and analysis of multi-soliton families for u_tt = u_xx - u + f(u)"};
    app.set_version_flag("--version", nlkg::version());
    app.require_subcommand(1);

    nlkg::CommandOptions opts;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "TOML or JSON experiment config")->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "seed for randomized checks");
        sub->add_option("--resolution", opts.resolution, "grid refinement factor")->check(CLI::PositiveNumber);
    };

    auto* spectrum = app.add_subcommand("spectrum", "eigen-objects of the boosted solitons");
    auto* construct = app.add_subcommand("construct", "backward construction of one family member");
    auto* analyze = app.add_subcommand("analyze", "diagnostics of a constructed run");
    auto* verify = app.add_subcommand("verify", "acceptance suite");
    auto* sweep = app.add_subcommand("sweep", "one construct + analyze run per value of the config sweep");
    for (auto* s : {spectrum, construct, analyze, verify, sweep}) add_common(s);
    analyze->add_option("--run", opts.run_dir, "construct output to analyze (default: --out)");
    verify->add_option("--only", opts.only, "criteria to run (1-10)")->check(CLI::Range(1, 10));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return nlkg::kExitConfig;
    }
    for (auto* s : {spectrum, construct, analyze, verify, sweep})
        if (s->count_all() > 0 && s->count("--seed") > 0) opts.seed = seed;
    const std::string name = app.get_subcommands().front()->get_name();
    return nlkg::run_command(name, opts, std::cout, std::cerr);
}
