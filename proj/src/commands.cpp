#include "nlkg/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "nlkg/acceptance.hpp"
#include "nlkg/io.hpp"
#include "nlkg/parallel.hpp"

namespace nlkg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError(fmt::format("cannot create output directory {}: {}", dir, ec.message()));
}

std::string bundle_stem(int k) { return fmt::format("bundle_{}", k); }

// Writes a bundle pair and registers both halves.
void save_bundle(RunManifest& m, const SpectralBundle& b, const std::string& stem) {
    write_bundle(join(m.dir(), stem), b);
    m.add_file(stem + ".json", "bundle-meta");
    m.add_file(stem + ".bin", "bundle");
}

json fit_json(const RateFit& f) {
    return {{"rate", f.rate}, {"intercept", f.intercept}, {"r2", f.r2}, {"samples", f.samples}};
}

struct Spectra {
    EigenPair ep;
    std::vector<std::shared_ptr<const SpectralBundle>> bundles;
};

Spectra build_spectra(const ExperimentConfig& cfg, const GroundState& gs, const Vec& betas) {
    Spectra s{ground_eigenpair(cfg.nonlinearity, gs, cfg.grid), {}};
    GroundMode mode(s.ep, gs);
    for (double beta : betas) s.bundles.push_back(std::make_shared<SpectralBundle>(boosted_pairs(mode, gs, beta, cfg.grid)));
    return s;
}

Vec rates_of(const Spectra& s) {
    Vec r;
    for (const auto& b : s.bundles) r.push_back(b->e);
    return r;
}

json stage_json(const StageReport& rep, double t0) {
    const auto& o = rep.outcome;
    json j = {{"j", rep.j},
              {"S_n", rep.S},
              {"a", o.a},
              {"b", o.b},
              {"exit_time", o.exit_time},
              {"reached_t0", o.exit_time <= t0},
              {"exited", o.exited},
              {"converged", o.converged},
              {"bound_ok", o.bound_ok},
              {"psi_deviation", o.psi_deviation},
              {"alpha_minus_t0", o.alpha_t0},
              {"crossing_slopes", o.crossing_slopes},
              {"method", rep.method},
              {"runs", rep.runs}};
    const auto& tr = o.trajectory;
    if (tr.has("normW") && tr.size() > 0) {
        const Vec& w = tr.series("normW");
        j["residual_norms"] = {{"W_at_exit", w.back()}, {"W_max", *std::max_element(w.begin(), w.end())}};
        try {
            j["fitted_rate"] = fit_json(fit_rate(tr.times(), w, tr.times().front(), tr.times().back()));
        } catch (const NumericalError&) {
            j["fitted_rate"] = nullptr;  // W vanishes identically on this stage
        }
    }
    return j;
}

// Deviation series of the single-soliton member: modes plus V.
FieldState single_W(const FamilyTrajectory& tr, size_t s, const DeviationModel& model) {
    FieldState W = model.modes(tr.c[s], tr.times[s]);
    axpy(1.0, tr.V[s], W);
    W.t = tr.times[s];
    return W;
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& opts) {
    ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.resolution != 1.0) cfg.apply_resolution(opts.resolution);
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    cfg.construction.threads = threads_from_env(cfg.construction.threads);
    cfg.validate();
    return cfg;
}

int cmd_spectrum(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
    make_dir(out);
    RunManifest m(out);
    m.set_command("spectrum");
    m.set_config_hash(cfg.hash());
    GroundState gs(cfg.nonlinearity);
    const Vec betas = cfg.spectrum_betas();
    Spectra sp = build_spectra(cfg, gs, betas);
    log << fmt::format("lambda0 = {:.12f} (residual {:.2e}, n = {}, L = {})\n", sp.ep.lambda0, sp.ep.residual,
                       cfg.grid.n, cfg.grid.half_width);
    json rows = json::array();
    for (size_t k = 0; k < betas.size(); ++k) {
        SpectralBundle b = *sp.bundles[k];
        if (cfg.spectrum.coercivity)
            b.mu = coercivity_mu(b, build_H(cfg.nonlinearity, b.Qb, b.beta, cfg.grid));
        save_bundle(m, b, bundle_stem(static_cast<int>(k)));
        double formula = std::sqrt(sp.ep.lambda0 * (1.0 - b.beta * b.beta));
        json row = {{"beta", b.beta},
                    {"e_beta", b.e},
                    {"e_formula", formula},
                    {"residual_plus", b.res_plus},
                    {"residual_minus", b.res_minus},
                    {"residual_kernel", b.res_kernel},
                    {"bundle", bundle_stem(static_cast<int>(k))}};
        if (cfg.spectrum.coercivity) row["mu"] = b.mu;
        rows.push_back(row);
        log << fmt::format("beta = {:.4f}: e = {:.12f} (formula {:.12f}), residuals {:.1e} / {:.1e} / {:.1e}", b.beta,
                           b.e, formula, b.res_plus, b.res_minus, b.res_kernel);
        if (cfg.spectrum.coercivity) log << fmt::format(", mu = {:.6f}", b.mu);
        log << '\n';
    }
    json report = {{"lambda0", sp.ep.lambda0},
                   {"lambda0_residual", sp.ep.residual},
                   {"lowest", sp.ep.lowest},
                   {"grid", {{"half_width", cfg.grid.half_width}, {"n", cfg.grid.n}}},
                   {"bundles", rows}};
    write_json(join(out, "spectrum.json"), report);
    m.add_file("spectrum.json", "report");
    write_json(join(out, "config.json"), cfg.to_json());
    m.add_file("config.json", "config");
    m.set_stage("spectrum", "ok");
    m.write();
    return kExitOk;
}

int cmd_construct(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
    const auto& cc = cfg.construction;
    if (cc.specs.empty()) throw ConfigError("construction.solitons: at least one soliton is required");
    make_dir(out);
    RunManifest m(out);
    m.set_command("construct");
    m.set_config_hash(cfg.hash());
    write_json(join(out, "config.json"), cfg.to_json());
    m.add_file("config.json", "config");

    auto t_start = Clock::now();
    GroundState gs(cfg.nonlinearity);
    Vec betas;
    for (const auto& s : cc.specs) betas.push_back(s.beta);
    Spectra sp = build_spectra(cfg, gs, betas);
    for (size_t k = 0; k < sp.bundles.size(); ++k) save_bundle(m, *sp.bundles[k], bundle_stem(static_cast<int>(k)));
    m.set_stage("spectrum", "ok");
    const Vec rates = rates_of(sp);
    cc.validate(rates);
    const double sigma = cc.sigma_value(rates);
    DeviationModel model(cfg.grid, gs, cc.specs, sp.bundles);

    json report = {{"N", cc.specs.size()}, {"t0", cc.t0}, {"schedule", cc.schedule}, {"A", cc.A},
                   {"e", rates},           {"sigma", sigma}};
    std::vector<FieldState> Z, base;
    FieldState U_t0;
    Vec stab;

    if (cc.specs.size() == 1) {
        SingleResult res = construct_single(cc.specs[0], cc.A[0], cc, sp.bundles[0], gs);
        U_t0 = res.U_t0;
        stab = res.stabilization;
        for (size_t s = 0; s < res.member.size(); ++s) {
            Z.push_back(single_W(res.member, s, model));
            base.push_back(boost(gs, cc.specs[0], res.member.times[s], cfg.grid));
        }
        res.residual.write_csv(join(out, "residual.csv"));
        m.add_file("residual.csv", "series");
        const Vec& r = res.residual.series("r");
        report["residual_max"] = *std::max_element(r.begin(), r.end());
        report["mode_defect"] = res.mode_defect;
        // A = 0 leaves nothing to fit; the residual level is the report then.
        if (res.fit.samples > 0) {
            report["fit"] = fit_json(res.fit);
            report["rate_over_e"] = res.fit.rate / rates[0];
            log << fmt::format("remainder rate {:.4f} = {:.3f} e_beta (r2 {:.5f})\n", res.fit.rate,
                               res.fit.rate / rates[0], res.fit.r2);
        } else {
            log << fmt::format("residual max {:.2e} (no rate fit)\n", report["residual_max"].get<double>());
        }
        m.set_stage("construct_single", res.stabilizing ? "ok" : "not stabilizing");
    } else {
        MultiResult res = construct_multi(cc, sp.bundles, gs);
        U_t0 = res.U_t0;
        stab = res.stabilization;
        for (size_t s = 0; s < res.member.size(); ++s) {
            Z.push_back(res.member.difference(res.base, s, model));
            base.push_back(res.base.state(s, model));
        }
        json stages = json::array();
        bool bounds = true;
        for (size_t n = 0; n < res.stages.size(); ++n) {
            for (const auto& rep : res.stages[n]) {
                stages.push_back(stage_json(rep, cc.t0));
                bounds = bounds && rep.outcome.bound_ok;
                const std::string name = fmt::format("S{}_stage{}", n, rep.j);
                if (rep.outcome.trajectory.size() > 0) {
                    const std::string csv = fmt::format("stage_S{}_j{}.csv", n, rep.j);
                    rep.outcome.trajectory.write_csv(join(out, csv));
                    m.add_file(csv, "series");
                }
                m.set_stage(name, rep.outcome.converged ? "ok" : "not converged");
                log << fmt::format("S = {:g}, stage {}: {} ({} runs), |b| <= 2|a| {}\n", rep.S, rep.j, rep.method,
                                   rep.runs, rep.outcome.bound_ok ? "yes" : "NO");
            }
        }
        write_json(join(out, "stages.json"), stages);
        m.add_file("stages.json", "report");
        report["bounds_ok"] = bounds;
    }
    report["stabilization"] = stab;

    write_snapshot(join(out, "U_t0.bin"), U_t0, cfg.grid);
    m.add_file("U_t0.bin", "snapshot");
    write_snapshot_series(join(out, "deviation.bin"), Z, cfg.grid);
    m.add_file("deviation.bin", "snapshot-series");
    write_snapshot_series(join(out, "base.bin"), base, cfg.grid);
    m.add_file("base.bin", "snapshot-series");
    Vec pair_index;
    for (size_t i = 0; i < stab.size(); ++i) pair_index.push_back(static_cast<double>(i));
    write_columns(join(out, "stabilization.csv"), {"pair", "difference"}, {pair_index, stab});
    m.add_file("stabilization.csv", "series");
    write_json(join(out, "report.json"), report);
    m.add_file("report.json", "report");
    m.set_stage("construct", "ok");
    m.write();
    log << fmt::format("construction finished in {:.1f} s; {} samples written to {}\n", seconds_since(t_start),
                       Z.size(), out);
    return kExitOk;
}

int cmd_analyze(const std::string& run_dir, const ExperimentConfig* override_cfg, const std::string& out,
                std::ostream& log) {
    if (!fs::exists(join(run_dir, "manifest.json")))
        throw ConfigError(fmt::format("{}: no manifest.json (run construct first)", run_dir));
    RunManifest in = RunManifest::load(run_dir);
    auto problems = in.verify();
    if (!problems.empty()) {
        std::string msg = fmt::format("{}: run directory damaged:", run_dir);
        for (const auto& p : problems) msg += " " + p + ";";
        throw ConfigError(msg);
    }
    ExperimentConfig cfg = override_cfg ? *override_cfg : ExperimentConfig::load(join(run_dir, "config.json"));
    const auto& cc = cfg.construction;
    json run_report = read_json(join(run_dir, "report.json"));

    Grid g;
    std::vector<FieldState> Z = read_snapshot_series(join(run_dir, "deviation.bin"), &g);
    if (Z.empty()) throw ConfigError(join(run_dir, "deviation.bin") + ": empty trajectory");
    std::vector<FieldState> base = read_snapshot_series(join(run_dir, "base.bin"));
    GroundState gs(cfg.nonlinearity);
    std::vector<std::shared_ptr<const SpectralBundle>> bundles;
    for (size_t k = 0; k < cc.specs.size(); ++k)
        bundles.push_back(std::make_shared<SpectralBundle>(read_bundle(join(run_dir, bundle_stem(static_cast<int>(k))))));
    if (bundles.empty()) throw ConfigError("construction.solitons: the run has no solitons");
    if (!(bundles.front()->grid == g)) throw ConfigError("deviation.bin and the bundles use different grids");
    DeviationModel model(g, gs, cc.specs, bundles);

    const double sigma = run_report.at("sigma").get<double>();
    const double t_lo = cc.t0 + 2.0, t_hi = cc.schedule.back() - 2.0;
    FamilyAnalysis fa = analyze_family(model, Z, base, cc.A, sigma, cfg.analysis, t_lo, t_hi);

    make_dir(out);
    RunManifest m = out == run_dir ? in : RunManifest(out);
    if (out != run_dir) {
        m.set_command("analyze");
        m.set_config_hash(cfg.hash());
    }
    json amps = json::array();
    for (size_t k = 0; k < fa.A.size(); ++k) {
        json a = {{"target", cc.A[k]}, {"value", fa.A[k].value}, {"error", fa.A[k].error}, {"samples", fa.A[k].samples}};
        if (!fa.A_error[k].empty()) a["note"] = fa.A_error[k];
        amps.push_back(a);
        log << fmt::format("A_{} = {:.6f} (target {:g}){}\n", k + 1, fa.A[k].value, cc.A[k],
                           fa.A_error[k].empty() ? "" : " [" + fa.A_error[k] + "]");
    }
    const auto& mono = fa.monotonicity;
    json report = {{"amplitudes", amps},
                   {"Z_fit", fit_json(fa.Z_fit)},
                   {"remainder_fit", fa.remainder_fit_ok ? fit_json(fa.remainder_fit) : json(nullptr)},
                   {"fit_window", {t_lo, t_hi}},
                   {"max_orth_residual", fa.max_orth_residual},
                   {"monotonicity",
                    {{"passed", mono.passed},
                     {"c1", mono.c1},
                     {"c2", mono.c2},
                     {"violations", mono.violations},
                     {"samples", mono.samples},
                     {"max_ratio", mono.max_ratio}}},
                   {"delta", fa.delta},
                   {"gamma", fa.gamma},
                   {"lambda", fa.lambda}};
    if (fa.remainder_fit_ok) {
        double e_last = bundles.back()->e;
        // Same window as the rate fit; the remainder vanishes identically at the final time.
        Vec tw, rw;
        for (size_t i = 0; i < fa.t.size(); ++i)
            if (fa.t[i] >= t_lo && fa.t[i] <= t_hi && fa.remainder[i] > 0.0) {
                tw.push_back(fa.t[i]);
                rw.push_back(fa.remainder[i]);
            }
        DecayCheck dc = verify_decay(tw, rw, e_last + 0.5 * sigma, cfg.analysis.decay_tol);
        report["remainder_decay"] = {{"target_rate", e_last + 0.5 * sigma}, {"rate", dc.rate},
                                     {"xi_integral", dc.xi_integral}, {"passed", dc.passed}};
        log << fmt::format("remainder rate {:.4f} (r2 {:.4f})\n", fa.remainder_fit.rate, fa.remainder_fit.r2);
    }
    log << fmt::format("monotonicity: {} ({} violations on {} samples)\n", mono.passed ? "ok" : "violated",
                       mono.violations, mono.samples);
    write_json(join(out, "analysis.json"), report);
    m.add_file("analysis.json", "report");

    std::vector<std::string> names = {"t", "Znorm", "remainder", "F", "alpha_plus_sq"};
    std::vector<Vec> cols = {fa.t, fa.Znorm, fa.remainder, fa.F, fa.alpha_plus_sq};
    for (size_t k = 0; k < fa.alpha_minus.size(); ++k) {
        names.push_back(fmt::format("alpha_minus_{}", k + 1));
        cols.push_back(fa.alpha_minus[k]);
        names.push_back(fmt::format("alpha_plus_{}", k + 1));
        cols.push_back(fa.alpha_plus[k]);
        names.push_back(fmt::format("mod_a_{}", k + 1));
        cols.push_back(fa.mod_a[k]);
    }
    write_columns(join(out, "analysis.csv"), names, cols);
    m.add_file("analysis.csv", "series");
    if (!mono.t.empty()) {
        write_columns(join(out, "monotonicity.csv"), {"t", "defect", "envelope"}, {mono.t, mono.defect, mono.envelope});
        m.add_file("monotonicity.csv", "series");
    }
    m.set_stage("analyze", "ok");
    m.write();
    return kExitOk;
}

int cmd_verify(const ExperimentConfig& cfg, const std::vector<int>& only, const std::string& out, std::ostream& log) {
    make_dir(out);
    // A previous run in the output directory is checked first: damaged
    // artifacts fail the suite before any criterion runs.
    std::vector<std::string> damaged;
    const bool had_manifest = fs::exists(join(out, "manifest.json"));
    RunManifest m = had_manifest ? RunManifest::load(out) : RunManifest(out);
    if (had_manifest) {
        damaged = m.verify();
        for (const auto& f : m.files()) {
            if (f.kind != "bundle-meta") continue;
            std::string stem = f.path.substr(0, f.path.size() - 5);
            try {
                read_bundle(join(out, stem));
            } catch (const std::exception& e) {
                damaged.push_back(e.what());
            }
        }
        for (const auto& d : damaged) log << "FAIL [artifacts] " << d << '\n';
        if (!damaged.empty()) return kExitAcceptance;
    } else {
        m.set_command("verify");
        m.set_config_hash(cfg.hash());
    }

    AcceptanceOptions opts;
    opts.nl = cfg.nonlinearity;
    opts.spectral_grid = cfg.grid;
    opts.only = only;
    opts.threads = cfg.construction.threads;
    opts.seed = cfg.seed;
    auto results = run_acceptance(opts, [&](const CriterionResult& r) { log << format_result(r) << std::endl; });
    json summary = acceptance_summary(results);
    write_json(join(out, "verify.json"), summary);
    m.add_file("verify.json", "report");
    m.set_stage("verify", summary.at("failed").get<int>() == 0 ? "ok" : "failed");
    m.write();
    std::string failed;
    for (const auto& r : results)
        if (!r.passed) failed += fmt::format(" {}", r.id);
    if (!failed.empty()) {
        log << "failed criteria:" << failed << '\n';
        return kExitAcceptance;
    }
    log << fmt::format("all {} criteria passed\n", results.size());
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
    if (cfg.sweep.empty()) throw ConfigError("sweep: the config has no [sweep] section");
    const int count = static_cast<int>(cfg.sweep.values.size());
    // Every member is validated before any work starts.
    std::vector<ExperimentConfig> members;
    for (int k = 0; k < count; ++k) members.push_back(cfg.sweep_member(k));
    make_dir(out);

    const int workers = std::min(resolve_threads(threads_from_env(cfg.construction.threads)), count);
    std::vector<std::string> logs(count), status(count, "ok");
    std::vector<json> summaries(count);
    parallel_for(count, workers, [&](int k) {
        ExperimentConfig c = members[k];
        if (workers > 1) c.construction.threads = 1;
        const std::string dir = join(out, fmt::format("run_{:03d}", k));
        std::ostringstream ls;
        try {
            cmd_construct(c, dir, ls);
            cmd_analyze(dir, &c, dir, ls);
            json a = read_json(join(dir, "analysis.json"));
            summaries[k] = {{"A", a.at("amplitudes")}, {"remainder_fit", a.at("remainder_fit")}};
        } catch (const std::exception& e) {
            status[k] = e.what();
        }
        logs[k] = ls.str();
    });

    RunManifest m(out);
    m.set_command("sweep");
    m.set_config_hash(cfg.hash());
    json rows = json::array();
    int failures = 0;
    for (int k = 0; k < count; ++k) {
        const std::string run = fmt::format("run_{:03d}", k);
        log << fmt::format("[{}] {} = {}\n", run, cfg.sweep.parameter, cfg.sweep.values[k].dump()) << logs[k];
        if (status[k] != "ok") {
            ++failures;
            log << "  failed: " << status[k] << '\n';
        }
        rows.push_back({{"run", run}, {"value", cfg.sweep.values[k]}, {"status", status[k]}, {"summary", summaries[k]}});
        m.set_stage(run, status[k] == "ok" ? "ok" : "failed");
    }
    write_json(join(out, "sweep.json"), {{"parameter", cfg.sweep.parameter}, {"runs", rows}});
    m.add_file("sweep.json", "report");
    write_json(join(out, "config.json"), cfg.to_json());
    m.add_file("config.json", "config");
    m.write();
    return failures ? kExitNumerical : kExitOk;
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    try {
        if (name == "analyze") {
            std::string run = !opts.run_dir.empty() ? opts.run_dir : !opts.out_dir.empty() ? opts.out_dir : "out";
            std::optional<ExperimentConfig> cfg;
            if (!opts.config_path.empty()) cfg = resolve_config(opts);
            std::string out = !opts.out_dir.empty() ? opts.out_dir : run;
            return cmd_analyze(run, cfg ? &*cfg : nullptr, out, log);
        }
        ExperimentConfig cfg = resolve_config(opts);
        const std::string& out = cfg.output_dir;
        if (name == "spectrum") return cmd_spectrum(cfg, out, log);
        if (name == "construct") return cmd_construct(cfg, out, log);
        if (name == "verify") return cmd_verify(cfg, opts.only, out, log);
        if (name == "sweep") return cmd_sweep(cfg, out, log);
        throw ConfigError("unknown command " + name);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace nlkg
