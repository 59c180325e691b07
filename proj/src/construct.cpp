#include "nlkg/construct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "nlkg/parallel.hpp"

namespace nlkg {

namespace {

double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void check_schedule(const ConstructionConfig& cfg) {
    if (!(cfg.t0 > 0.0)) throw ConfigError("construction.t0 must be positive");
    if (cfg.schedule.empty()) throw ConfigError("construction.schedule is empty");
    double prev = cfg.t0;
    for (double S : cfg.schedule) {
        if (!(S > prev)) throw ConfigError("construction.schedule must increase and start above t0");
        prev = S;
    }
    if (cfg.dt < 0.0) throw ConfigError("construction.dt must be nonnegative");
    if (cfg.sigma < 0.0) throw ConfigError("construction.sigma must be nonnegative");
    if (cfg.bisection_iters < 1 || cfg.fixed_point_iters < 1)
        throw ConfigError("construction iteration caps must be positive");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("construction.damping must lie in (0, 1]");
    if (cfg.scan_points < 2) throw ConfigError("construction.scan_points must be at least 2");
    if (cfg.sample_stride < 1) throw ConfigError("construction.sample_stride must be at least 1");
}

// One step for every S_n when the spans S_n - t0 share a common unit, so that
// all runs sample the same times and differ only through S_n.
double default_dt(const ConstructionConfig& cfg, const Grid& grid) {
    double dt = cfg.dt > 0.0 ? cfg.dt : 0.5 * grid.h();
    if (cfg.schedule.empty()) return dt;
    double unit = cfg.schedule.front() - cfg.t0;
    for (double S : cfg.schedule) {
        double q = (S - cfg.t0) / unit;
        if (std::fabs(q - std::round(q)) > 1e-9) return dt;
    }
    return unit / std::ceil(unit / dt - 1e-9);
}

FamilyTrajectory subsample(const FamilyTrajectory& full, int stride) {
    FamilyTrajectory tr;
    const int K = static_cast<int>(full.size()) - 1;
    for (int m = 0; m <= K; ++m) {
        if (m % stride != 0 && m != K) continue;
        tr.times.push_back(full.times[m]);
        tr.c.push_back(full.c[m]);
        tr.V.push_back(full.V[m]);
    }
    return tr;
}

void record_node(FamilyTrajectory& tr, int m, const FieldState& V, const Vec& c) {
    tr.times[m] = V.t;
    tr.c[m] = c;
    tr.V[m] = V;
}

void reset_nodes(FamilyTrajectory& tr, int count) {
    tr.times.assign(count, 0.0);
    tr.c.assign(count, Vec());
    tr.V.assign(count, FieldState());
}

// Pairs with an increase beyond this floor count as a failure to stabilize.
constexpr double kStabilizationFloor = 1e-14;

}  // namespace

Vec ConstructionConfig::default_schedule(double t0, int count) {
    Vec s(count);
    for (int n = 0; n < count; ++n) s[n] = t0 + 4.0 * (n + 1);
    return s;
}

double ConstructionConfig::sigma_formula(const std::vector<SolitonSpec>& specs, const Vec& rates) {
    if (rates.empty()) throw ConfigError("sigma needs at least one soliton");
    double m = rates.front();
    if (specs.size() > 1) {
        Vec b;
        for (const auto& s : specs) b.push_back(s.beta);
        std::sort(b.begin(), b.end());
        double gap = std::numeric_limits<double>::infinity();
        for (size_t i = 1; i < b.size(); ++i) gap = std::min(gap, b[i] - b[i - 1]);
        m = std::min(m, specs.back().gamma() * gap);
    }
    return m / 16.0;
}

void ConstructionConfig::validate(const Vec& rates) const {
    int N = static_cast<int>(specs.size());
    if (N == 0) throw ConfigError("construction needs at least one soliton");
    if (static_cast<int>(A.size()) != N)
        throw ConfigError(fmt::format("construction.A has {} entries for {} solitons", A.size(), N));
    if (static_cast<int>(rates.size()) != N) throw ConfigError("one instability rate per soliton required");
    for (const auto& s : specs) s.validate();
    for (double a : A)
        if (!std::isfinite(a)) throw ConfigError("construction.A must be finite");
    if (N > 1) {
        for (int k = 0; k + 1 < N; ++k) {
            if (!(std::fabs(specs[k].beta) > std::fabs(specs[k + 1].beta)))
                throw ConfigError("solitons must be ordered with |beta_1| > ... > |beta_N|");
            if (!(rates[k] < rates[k + 1])) throw ConfigError("instability rates must increase along the ordering");
        }
        if (!(std::fabs(specs.back().beta) > 0.0)) throw ConfigError("multi-soliton construction needs beta_N != 0");
        Vec b;
        for (const auto& s : specs) b.push_back(s.beta);
        std::sort(b.begin(), b.end());
        for (int k = 0; k + 1 < N; ++k)
            if (b[k] == b[k + 1]) throw ConfigError("soliton velocities must be distinct");
    }
    check_schedule(*this);
}

// ---------------------------------------------------------------- single

FieldState final_data_single(const SolitonSpec& spec, double A, double S, const SpectralBundle& bundle,
                             const GroundState& gs) {
    if (std::fabs(bundle.beta - spec.beta) > 1e-14) throw ConfigError("bundle velocity does not match spec");
    Fourier fft(bundle.grid);
    FieldState R = boost(gs, spec, S, bundle.grid);
    if (A == 0.0) return R;
    FieldState Y = bundle.at(SpectralBundle::Profile::Yp, spec.center(S), fft);
    double amp = A * std::exp(-bundle.e * S);
    if (std::fabs(amp) * energy_norm(Y, fft) > 0.1 * energy_norm(R, fft))
        fmt::print(stderr, "warning: final-data perturbation exceeds 10% of the soliton norm (A = {}, S = {})\n", A,
                   S);
    axpy(amp, Y, R);
    R.t = S;
    return R;
}

SingleResult construct_single(const SolitonSpec& spec, double A, const ConstructionConfig& cfg,
                              std::shared_ptr<const SpectralBundle> bundle, const GroundState& gs) {
    check_schedule(cfg);
    spec.validate();
    const Grid& grid = bundle->grid;
    const Nonlinearity& nl = gs.nonlinearity();
    const int nS = static_cast<int>(cfg.schedule.size());
    const double dt = default_dt(cfg, grid);

    std::vector<FieldState> V_t0(nS);
    SingleResult res;
    res.S = cfg.schedule;
    parallel_for(nS, cfg.threads, [&](int i) {
        DeviationModel model(grid, gs, {spec}, {bundle});
        DeviationIntegrator integ(model, nl, grid);
        TimeGrid tg(cfg.schedule[i], cfg.t0, dt);
        const bool last = (i == nS - 1);
        FamilyTrajectory nodes;
        if (last) reset_nodes(nodes, tg.K + 1);
        Vec c = {A};
        V_t0[i] = integ.run(
            c, tg, FieldState(grid.n),
            [&](int m, const Frame&, const FieldState& V, const Vec& cm) {
                if (last) record_node(nodes, m, V, cm);
                return true;
            },
            false);
        if (last) {
            res.mode_defect = model.mode_defect();
            res.member = subsample(nodes, cfg.sample_stride);
            for (size_t s = 0; s < res.member.size(); ++s) {
                const FieldState& V = res.member.V[s];
                res.residual.add_sample(res.member.times[s],
                                        {{"r", energy_norm(V, model.fft())}, {"r_l2", l2_norm(V, grid)}});
            }
            res.U_t0 = model.state(c, V_t0[i]);
        }
    });

    Fourier fft(grid);
    for (int i = 0; i + 1 < nS; ++i) res.stabilization.push_back(energy_norm(V_t0[i] - V_t0[i + 1], fft));
    for (size_t i = 0; i < res.stabilization.size(); ++i) {
        res.max_stabilization = std::max(res.max_stabilization, res.stabilization[i]);
        if (i > 0 && res.stabilization[i] > res.stabilization[i - 1] + kStabilizationFloor) res.stabilizing = false;
    }
    if (!res.stabilizing)
        throw NumericalError(fmt::format("construction does not stabilize across S_n (differences {})",
                                         fmt::join(res.stabilization, ", ")));

    const Vec& t = res.residual.times();
    const Vec& r = res.residual.series("r");
    bool positive = std::all_of(r.begin() + 1, r.end(), [](double v) { return v > 0.0; });
    double S = cfg.schedule.back();
    if (positive && S - 2.0 > cfg.t0 + 2.0) res.fit = fit_rate(t, r, cfg.t0 + 2.0, S - 2.0);
    return res;
}

// ---------------------------------------------------------------- modulation

ModulationSolve solve_modulation_b(const Vec& a, double S, const DeviationModel& model, const std::vector<int>& free) {
    const int d = static_cast<int>(free.size());
    if (static_cast<int>(a.size()) != d) throw NumericalError("target vector size does not match free directions");
    ModulationSolve out;
    if (d == 0) return out;
    std::vector<FieldState> Y(d), Zm(d);
    for (int k = 0; k < d; ++k) {
        Y[k] = model.profile(free[k], SpectralBundle::Profile::Yp, S);
        Zm[k] = model.profile(free[k], SpectralBundle::Profile::Zm, S);
    }
    Eigen::MatrixXd psi(d, d);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) psi(k, l) = inner_product(Y[l], Zm[k], model.grid());
    Eigen::MatrixXd M = psi - Eigen::MatrixXd::Identity(d, d);
    out.psi_deviation = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
    if (out.psi_deviation > 0.5)
        throw NumericalError(fmt::format("modulation matrix too far from identity at S = {} (||Psi - I|| = {:.3g})",
                                         S, out.psi_deviation));
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(a.data(), d);
    Eigen::VectorXd b = psi.partialPivLu().solve(rhs);
    out.b.assign(b.data(), b.data() + d);
    out.bound_ok = norm2(out.b) <= 2.0 * norm2(a) * (1.0 + 1e-12);
    return out;
}

// ---------------------------------------------------------------- stages

StageContext::StageContext(const DeviationModel& model, const ConstructionConfig& cfg, double sigma, double S, int j,
                           std::shared_ptr<const FamilyTrajectory> prev)
    : model_(model),
      cfg_(cfg),
      sigma_(sigma),
      S_(S),
      j_(j),
      prev_(std::move(prev)),
      tg_(S, cfg.t0, default_dt(cfg, model.grid())),
      integ_(model, model.nonlinearity(), model.grid()) {
    const int N = model.size();
    if (j < 0 || j > N) throw ConfigError("stage index out of range");
    if (j > 0 && !prev_) throw ConfigError("stage j >= 1 needs the previous member");
    if (prev_ && static_cast<int>(prev_->size()) != tg_.K + 1)
        throw ConfigError("previous stage was sampled on a different time grid");
    if (j == 0) {
        for (int k = 0; k < N; ++k) free_.push_back(k);
        rho_ = 8.0 * sigma;
    } else {
        for (int k = j; k < N; ++k) free_.push_back(k);
        rho_ = model.rate(j - 1) + 2.0 * sigma;
    }
    w_rate_ = rho_ - sigma;
}

Vec StageContext::coefficients(const Vec& b) const {
    Vec c = prev_ ? prev_->c.front() : Vec(model_.size(), 0.0);
    if (j_ >= 1) c[j_ - 1] += cfg_.A[j_ - 1];
    for (size_t l = 0; l < free_.size(); ++l) c[free_[l]] += b[l] * std::exp(model_.rate(free_[l]) * S_);
    return c;
}

ShootingOutcome StageContext::exit_time_map(const Vec& a, FamilyTrajectory* nodes, bool stop_on_exit) const {
    const int d = static_cast<int>(free_.size());
    ShootingOutcome out;
    out.a = a;
    ModulationSolve ms = solve_modulation_b(a, S_, model_, free_);
    out.b = ms.b;
    out.psi_deviation = ms.psi_deviation;
    out.bound_ok = ms.bound_ok;
    Vec c = coefficients(out.b);
    if (nodes) reset_nodes(*nodes, tg_.K + 1);
    const int N = model_.size();
    Vec dc(N);

    // Relative slack so that a on the sphere counts as inside at S.
    constexpr double slack = 1e-9;
    double N_prev = 0.0, t_prev = S_;
    Vec alpha(d), alpha_good(d);
    double T = S_;
    bool any_good = false;
    int stride = cfg_.sample_stride;

    auto observer = [&](int m, const Frame& fr, const FieldState& V, const Vec& cm) {
        if (nodes) record_node(*nodes, m, V, cm);
        const double t = fr.t;
        // W = U - Phi_prev - A_j e^{-e_j t} Y+,j
        FieldState W = V;
        for (int k = 0; k < N; ++k) {
            dc[k] = cm[k] - (prev_ ? prev_->c[m][k] : 0.0);
            if (j_ >= 1 && k == j_ - 1) dc[k] -= cfg_.A[k];
        }
        if (prev_) axpy(-1.0, prev_->V[m], W);
        for (int k = 0; k < N; ++k)
            if (dc[k] != 0.0) axpy(dc[k] * std::exp(-model_.rate(k) * t), fr.Yp[k], W);
        const double nW = energy_norm(W, model_.fft());
        double Nval = 0.0;
        for (int k = 0; k < d; ++k) {
            alpha[k] = inner_product(W, fr.Zm[free_[k]], model_.grid());
            double s = std::exp(rho_ * t) * alpha[k];
            Nval += s * s;
        }
        const bool ok = nW <= std::exp(-w_rate_ * t) * (1.0 + slack) && Nval <= 1.0 + slack;
        if (m > 0 && N_prev <= 1.0 + slack && Nval > 1.0 + slack) out.crossing_slopes.push_back((N_prev - Nval) / (t_prev - t));
        const bool sample = (m % stride == 0) || m == tg_.K || (!ok && !out.exited);
        if (sample) {
            std::vector<std::pair<std::string, double>> cols = {{"normW", nW}, {"N", Nval}};
            for (int k = 0; k < d; ++k) cols.emplace_back(fmt::format("alpha_minus_{}", free_[k] + 1), alpha[k]);
            out.trajectory.add_sample(t, cols);
        }
        if (!ok && !out.exited) {
            out.exited = true;
            if (!any_good) {
                T = S_;
                alpha_good = alpha;
            } else {
                T = t_prev;
            }
        }
        if (ok && !out.exited) {
            alpha_good = alpha;
            any_good = true;
        }
        N_prev = Nval;
        t_prev = t;
        if (m == tg_.K) out.alpha_t0 = alpha;
        return !(out.exited && stop_on_exit);
    };
    integ_.run(c, tg_, FieldState(model_.grid().n), observer, true, true);

    out.exit_time = out.exited ? T : tg_.t_end;
    out.exit_projection = alpha_good;
    out.rescaled.resize(d);
    for (int k = 0; k < d; ++k) out.rescaled[k] = std::exp(rho_ * (out.exit_time - S_)) * alpha_good[k];
    out.converged = !out.exited;
    return out;
}

Vec StageContext::target(const ShootingOutcome& o) const {
    Vec g(free_.size());
    for (size_t k = 0; k < free_.size(); ++k) {
        if (!o.alpha_t0.empty())
            g[k] = o.alpha_t0[k];
        else
            g[k] = std::exp(model_.rate(free_[k]) * (o.exit_time - tg_.t_end)) * o.exit_projection[k];
    }
    return g;
}

// ---------------------------------------------------------------- search

namespace {

void clip_to_ball(Vec& a, double r) {
    double n = norm2(a);
    if (n > r) {
        for (double& x : a) x *= 0.999 * r / n;
    }
}

}  // namespace

StageReport find_a(const StageContext& ctx, const ConstructionConfig& cfg) {
    StageReport rep;
    rep.j = ctx.stage();
    rep.S = ctx.time_grid().S;
    const int d = static_cast<int>(ctx.free().size());
    const double r = ctx.radius();
    const double t0 = ctx.time_grid().t_end, S = ctx.time_grid().S;

    if (d == 0) {
        rep.outcome = ctx.exit_time_map({}, nullptr, false);
        rep.runs = 1;
        rep.method = "none";
        return rep;
    }

    auto run = [&](const Vec& a) {
        ++rep.runs;
        return ctx.exit_time_map(a);
    };
    auto value = [&](const ShootingOutcome& o) { return ctx.target(o); };

    if (d == 1) {
        rep.method = "bisection";
        double lo = -r, hi = r;
        double glo = value(run({lo}))[0], ghi = value(run({hi}))[0];
        if (!(glo < 0.0 && ghi > 0.0))
            throw NumericalError(fmt::format("stage {} at S = {}: exit value does not change sign on the ball "
                                             "(g(-r) = {:.3g}, g(r) = {:.3g})",
                                             rep.j, S, glo, ghi));
        for (int it = 0; it < cfg.bisection_iters && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * r;
             ++it) {
            double mid = 0.5 * (lo + hi);
            double g = value(run({mid}))[0];
            if (g == 0.0) {
                lo = hi = mid;
                break;
            }
            (g < 0.0 ? lo : hi) = mid;
        }
        rep.outcome = run({0.5 * (lo + hi)});
        rep.outcome.converged = !rep.outcome.exited;
        return rep;
    }

    rep.method = "fixed-point";
    const int budget = cfg.fixed_point_iters;
    Vec a(d, 0.0);
    ShootingOutcome o = run(a);
    const auto& free = ctx.free();
    auto fixed_point = [&](int max_runs) {
        while (o.exited && rep.runs < max_runs) {
            for (int k = 0; k < d; ++k)
                a[k] -= cfg.damping * std::exp(-ctx.rate(free[k]) * (S - o.exit_time)) * o.exit_projection[k];
            clip_to_ball(a, r);
            o = run(a);
        }
    };
    auto newton = [&](int max_runs) {
        if (o.exited) return;
        rep.method += "+newton";
        // Chord method: one finite-difference Jacobian at the first interior point.
        Vec g = value(o);
        Eigen::MatrixXd J(d, d);
        for (int k = 0; k < d && rep.runs < max_runs; ++k) {
            Vec ap = a;
            double h = 1e-3 * r;
            ap[k] += h;
            Vec gp = value(run(ap));
            for (int i = 0; i < d; ++i) J(i, k) = (gp[i] - g[i]) / h;
        }
        auto lu = J.partialPivLu();
        const double tol = cfg.newton_tol * std::exp(-ctx.rho() * t0);
        for (int it = 0; it < 30 && rep.runs < max_runs; ++it) {
            Eigen::VectorXd step = lu.solve(Eigen::Map<const Eigen::VectorXd>(g.data(), d));
            Vec a_new = a;
            for (int k = 0; k < d; ++k) a_new[k] -= step(k);
            clip_to_ball(a_new, r);
            ShootingOutcome on = run(a_new);
            Vec gn = value(on);
            if (norm2(gn) >= norm2(g) && !on.exited) break;  // rounding floor reached
            a = a_new;
            o = on;
            g = gn;
            if (norm2(g) <= tol || step.norm() <= 1e-13 * r) break;
        }
    };

    fixed_point(budget);
    newton(budget);
    if (o.exited) {
        // Grid scan of the ball, then restart from the best point.
        rep.method += "+scan";
        const int P = cfg.scan_points;
        double best = std::numeric_limits<double>::infinity();
        Vec best_a = a;
        std::vector<int> idx(d, 0);
        for (;;) {
            Vec p(d);
            for (int k = 0; k < d; ++k) p[k] = -r + 2.0 * r * idx[k] / (P - 1);
            if (norm2(p) < r && rep.runs < budget) {
                ShootingOutcome q = run(p);
                double score = norm2(value(q));
                if (!q.exited) score *= 1e-3;
                if (score < best) {
                    best = score;
                    best_a = p;
                }
            }
            int k = 0;
            while (k < d && ++idx[k] == P) idx[k++] = 0;
            if (k == d) break;
        }
        a = best_a;
        o = run(a);
        fixed_point(budget);
        newton(budget);
    }
    rep.outcome = o;
    rep.outcome.converged = !o.exited;
    if (o.exited)
        fmt::print(stderr, "warning: stage {} at S = {} left the box at T = {:.4g} after {} runs\n", rep.j, S,
                   o.exit_time, rep.runs);
    return rep;
}

// ---------------------------------------------------------------- multi

MultiResult construct_multi(const ConstructionConfig& cfg,
                            const std::vector<std::shared_ptr<const SpectralBundle>>& bundles, const GroundState& gs) {
    const int N = static_cast<int>(cfg.specs.size());
    if (static_cast<int>(bundles.size()) != N) throw ConfigError("one spectral bundle per soliton required");
    Vec rates;
    for (const auto& b : bundles) rates.push_back(b->e);
    cfg.validate(rates);
    const Grid& grid = bundles.front()->grid;
    const int nS = static_cast<int>(cfg.schedule.size());

    MultiResult res;
    res.S = cfg.schedule;
    res.sigma = cfg.sigma_value(rates);
    res.stages.resize(nS);
    std::vector<FamilyTrajectory> finals(nS);  // t0 node of each run

    parallel_for(nS, cfg.threads, [&](int i) {
        const double S = cfg.schedule[i];
        const bool last = (i == nS - 1);
        const TimeGrid tg(S, cfg.t0, default_dt(cfg, grid));
        DeviationModel model(grid, gs, cfg.specs, bundles);
        std::shared_ptr<const FamilyTrajectory> prev;
        auto& reports = res.stages[i];

        auto finish = [&](const StageContext& ctx, StageReport rep) {
            auto nodes = std::make_shared<FamilyTrajectory>();
            bool conv = rep.outcome.converged;
            rep.outcome = ctx.exit_time_map(rep.outcome.a, nodes.get(), false);
            rep.outcome.converged = conv && !rep.outcome.exited;
            rep.runs += 1;
            prev = nodes;
            reports.push_back(std::move(rep));
        };

        if (N == 1) {
            // The bare soliton is exact; nothing to shoot for the base member.
            StageReport rep;
            rep.S = S;
            rep.method = "exact";
            rep.outcome.converged = true;
            rep.outcome.exit_time = cfg.t0;
            reports.push_back(rep);
            auto zero = std::make_shared<FamilyTrajectory>();
            for (int m = 0; m <= tg.K; ++m) {
                zero->times.push_back(tg.t(m));
                zero->c.push_back(Vec(N, 0.0));
                zero->V.push_back(FieldState(grid.n, tg.t(m)));
            }
            prev = zero;
        } else {
            StageContext ctx(model, cfg, res.sigma, S, 0, nullptr);
            finish(ctx, find_a(ctx, cfg));
        }
        if (last) res.base = subsample(*prev, cfg.sample_stride);
        for (int j = 1; j <= N; ++j) {
            StageContext ctx(model, cfg, res.sigma, S, j, prev);
            finish(ctx, find_a(ctx, cfg));
        }
        finals[i].times = {prev->times.back()};
        finals[i].c = {prev->c.back()};
        finals[i].V = {prev->V.back()};
        if (last) {
            res.member = subsample(*prev, cfg.sample_stride);
            res.U_t0 = finals[i].state(0, model);
        }
    });

    DeviationModel model(grid, gs, cfg.specs, bundles);
    for (int i = 0; i + 1 < nS; ++i)
        res.stabilization.push_back(energy_norm(finals[i].difference(finals[i + 1], 0, model), model.fft()));
    for (double s : res.stabilization) res.max_stabilization = std::max(res.max_stabilization, s);
    return res;
}

}  // namespace nlkg
