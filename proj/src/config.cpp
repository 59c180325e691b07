#include "nlkg/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>
#include <zlib.h>

namespace nlkg {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& node, const std::string& where) {
    if (auto* tbl = node.as_table()) {
        json out = json::object();
        for (auto&& [key, value] : *tbl) {
            std::string k(key.str());
            out[k] = toml_to_json(value, where.empty() ? k : where + "." + k);
        }
        return out;
    }
    if (auto* arr = node.as_array()) {
        json out = json::array();
        size_t i = 0;
        for (auto&& value : *arr) out.push_back(toml_to_json(value, fmt::format("{}[{}]", where, i++)));
        return out;
    }
    if (auto v = node.value_exact<int64_t>()) return *v;
    if (auto v = node.value_exact<double>()) return *v;
    if (auto v = node.value_exact<bool>()) return *v;
    if (auto v = node.value_exact<std::string>()) return *v;
    throw ConfigError(fmt::format("{}: unsupported TOML value type (dates are not accepted)", where));
}

// Strict view of one JSON object: every key must be consumed, so typos in
// option names surface as errors instead of silently keeping a default.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected a table", display()));
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key, double fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", field(key)));
        double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(fmt::format("{}: must be finite", field(key)));
        return x;
    }

    int integer(const std::string& key, int fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", field(key)));
        auto x = v.get<int64_t>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            throw ConfigError(fmt::format("{}: out of range", field(key)));
        return static_cast<int>(x);
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer() || v.get<int64_t>() < 0)
            throw ConfigError(fmt::format("{}: expected a nonnegative integer", field(key)));
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", field(key)));
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", field(key)));
        return v.get<std::string>();
    }

    Vec numbers(const std::string& key, const Vec& fallback) {
        if (!take(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array of numbers", field(key)));
        Vec out;
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(fmt::format("{}[{}]: expected a number", field(key), i));
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Section sub(const std::string& key) {
        take(key);
        return Section(j_.at(key), field(key));
    }

    const json& raw(const std::string& key) {
        take(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(fmt::format("{}: unknown key", field(it.key())));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;

    bool take(const std::string& key) {
        if (!j_.contains(key)) return false;
        used_.insert(key);
        return true;
    }
    std::string display() const { return path_.empty() ? "<root>" : path_; }
};

template <class Fn>
void with_section(Section& parent, const std::string& key, Fn&& fn) {
    if (!parent.has(key)) return;
    Section s = parent.sub(key);
    fn(s);
    s.finish();
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::string text = read_file(path);
    if (ends_with(path, ".json")) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(fmt::format("{}: {}", path, e.what()));
        }
        return from_json(j, path);
    }
    return from_toml(text, path);
}

ExperimentConfig ExperimentConfig::from_toml(const std::string& text, const std::string& origin) {
    toml::table tbl;
    try {
        tbl = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        const auto& src = e.source();
        throw ConfigError(fmt::format("{}:{}:{}: {}", origin, src.begin.line, src.begin.column, e.description()));
    }
    return from_json(toml_to_json(tbl, ""), origin);
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& origin) {
    ExperimentConfig c;
    try {
        Section root(j, "");
        c.seed = root.unsigned_integer("seed", c.seed);
        c.output_dir = root.string("output_dir", c.output_dir);

        with_section(root, "nonlinearity", [&](Section& s) {
            double p = s.number("p", 3.0);
            double coeff = s.number("coeff", 1.0);
            c.nonlinearity = Nonlinearity::power(p, coeff);
        });
        with_section(root, "grid", [&](Section& s) {
            c.grid.half_width = s.number("half_width", c.grid.half_width);
            c.grid.n = s.integer("n", c.grid.n);
        });
        with_section(root, "solver", [&](Section& s) {
            auto& v = c.solver;
            v.dt = s.number("dt", v.dt);
            if (s.has("scheme")) v.scheme = parse_scheme(s.string("scheme", ""));
            if (s.has("boundary")) v.boundary = parse_boundary(s.string("boundary", ""));
            v.cfl_safety = s.number("cfl_safety", v.cfl_safety);
            v.snapshot_stride = s.integer("snapshot_stride", v.snapshot_stride);
            v.series_stride = s.integer("series_stride", v.series_stride);
            v.blowup_factor = s.number("blowup_factor", v.blowup_factor);
            v.horizon = s.number("horizon", v.horizon);
        });
        with_section(root, "spectrum", [&](Section& s) {
            c.spectrum.betas = s.numbers("betas", c.spectrum.betas);
            c.spectrum.coercivity = s.boolean("coercivity", c.spectrum.coercivity);
        });
        with_section(root, "construction", [&](Section& s) {
            auto& v = c.construction;
            v.t0 = s.number("t0", v.t0);
            v.schedule = s.numbers("schedule", v.schedule);
            v.A = s.numbers("A", v.A);
            v.sigma = s.number("sigma", v.sigma);
            v.dt = s.number("dt", v.dt);
            v.bisection_iters = s.integer("bisection_iters", v.bisection_iters);
            v.fixed_point_iters = s.integer("fixed_point_iters", v.fixed_point_iters);
            v.damping = s.number("damping", v.damping);
            v.scan_points = s.integer("scan_points", v.scan_points);
            v.newton_tol = s.number("newton_tol", v.newton_tol);
            v.sample_stride = s.integer("sample_stride", v.sample_stride);
            v.threads = s.integer("threads", v.threads);
            if (s.has("solitons")) {
                const json& arr = s.raw("solitons");
                if (!arr.is_array()) throw ConfigError(s.field("solitons") + ": expected an array of tables");
                v.specs.clear();
                for (size_t i = 0; i < arr.size(); ++i) {
                    Section sol(arr[i], fmt::format("{}[{}]", s.field("solitons"), i));
                    SolitonSpec spec;
                    spec.beta = sol.number("beta", 0.0);
                    spec.x0 = sol.number("x0", 0.0);
                    sol.finish();
                    v.specs.push_back(spec);
                }
            }
        });
        with_section(root, "analysis", [&](Section& s) {
            auto& v = c.analysis;
            v.delta = s.number("delta", v.delta);
            v.lambda_exp = s.number("lambda_exp", v.lambda_exp);
            v.gamma = s.number("gamma", v.gamma);
            v.factor = s.number("factor", v.factor);
            v.plateau_tol = s.number("plateau_tol", v.plateau_tol);
            v.decay_tol = s.number("decay_tol", v.decay_tol);
        });
        with_section(root, "sweep", [&](Section& s) {
            c.sweep.parameter = s.string("parameter", "");
            if (s.has("values")) {
                const json& arr = s.raw("values");
                if (!arr.is_array() || arr.empty())
                    throw ConfigError(s.field("values") + ": expected a nonempty array");
                c.sweep.values.assign(arr.begin(), arr.end());
            }
            if (c.sweep.parameter.empty() || c.sweep.values.empty())
                throw ConfigError("sweep: both parameter and values are required");
        });
        root.finish();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    }
    if (c.construction.schedule.empty()) c.construction.schedule = ConstructionConfig::default_schedule(c.construction.t0);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    }
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["nonlinearity"] = {{"p", nonlinearity.p()}, {"coeff", nonlinearity.coeff()}};
    j["grid"] = {{"half_width", grid.half_width}, {"n", grid.n}};
    j["solver"] = {{"dt", solver.dt},
                   {"scheme", to_string(solver.scheme)},
                   {"boundary", to_string(solver.boundary)},
                   {"cfl_safety", solver.cfl_safety},
                   {"snapshot_stride", solver.snapshot_stride},
                   {"series_stride", solver.series_stride},
                   {"blowup_factor", solver.blowup_factor},
                   {"horizon", solver.horizon}};
    j["spectrum"] = {{"betas", spectrum.betas}, {"coercivity", spectrum.coercivity}};
    const auto& c = construction;
    json sol = json::array();
    for (const auto& s : c.specs) sol.push_back({{"beta", s.beta}, {"x0", s.x0}});
    j["construction"] = {{"t0", c.t0},
                         {"schedule", c.schedule},
                         {"A", c.A},
                         {"sigma", c.sigma},
                         {"dt", c.dt},
                         {"bisection_iters", c.bisection_iters},
                         {"fixed_point_iters", c.fixed_point_iters},
                         {"damping", c.damping},
                         {"scan_points", c.scan_points},
                         {"newton_tol", c.newton_tol},
                         {"sample_stride", c.sample_stride},
                         {"threads", c.threads},
                         {"solitons", sol}};
    j["analysis"] = {{"delta", analysis.delta},         {"lambda_exp", analysis.lambda_exp},
                     {"gamma", analysis.gamma},         {"factor", analysis.factor},
                     {"plateau_tol", analysis.plateau_tol}, {"decay_tol", analysis.decay_tol}};
    if (!sweep.empty()) j["sweep"] = {{"parameter", sweep.parameter}, {"values", sweep.values}};
    return j;
}

std::string ExperimentConfig::hash() const {
    std::string s = to_json().dump();
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
    return fmt::format("{:08x}", static_cast<unsigned long>(crc));
}

void ExperimentConfig::apply_resolution(double mult) {
    if (!(mult > 0.0) || !std::isfinite(mult)) throw ConfigError("--resolution must be a positive number");
    int n = static_cast<int>(std::lround(grid.n * mult / 2.0)) * 2;
    grid.n = std::max(n, 16);
    if (solver.dt > 0.0) solver.dt /= mult;
    if (construction.dt > 0.0) construction.dt /= mult;
}

void ExperimentConfig::validate() const {
    nonlinearity.validate();
    grid.validate();
    solver.validate(grid);
    for (double b : spectrum.betas)
        if (!(std::fabs(b) < 1.0)) throw ConfigError(fmt::format("spectrum.betas: |beta| must be < 1 (got {})", b));
    const auto& c = construction;
    if (c.specs.empty()) {
        if (!c.A.empty()) throw ConfigError("construction.A given without construction.solitons");
    } else {
        for (size_t i = 0; i < c.specs.size(); ++i) {
            try {
                c.specs[i].validate();
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("construction.solitons[{}]: {}", i, e.what()));
            }
        }
        if (c.A.size() != c.specs.size())
            throw ConfigError(fmt::format("construction.A has {} entries for {} solitons", c.A.size(), c.specs.size()));
        for (size_t k = 0; k + 1 < c.specs.size(); ++k)
            if (!(std::fabs(c.specs[k].beta) > std::fabs(c.specs[k + 1].beta)))
                throw ConfigError("construction.solitons must be ordered with |beta_1| > ... > |beta_N|");
    }
    if (!(c.t0 > 0.0)) throw ConfigError("construction.t0 must be positive");
    double prev = c.t0;
    for (double S : c.schedule) {
        if (!(S > prev)) throw ConfigError("construction.schedule must increase and start above t0");
        prev = S;
    }
    double S_max = c.schedule.empty() ? c.t0 : c.schedule.back();
    if (solver.horizon > 0.0 && S_max > solver.horizon)
        throw ConfigError(fmt::format("construction.schedule: S = {} exceeds solver.horizon = {}", S_max, solver.horizon));
    // Centers must keep their tails (Q ~ e^{-gamma d}) clear of the box edge.
    for (size_t i = 0; i < c.specs.size(); ++i) {
        const auto& s = c.specs[i];
        double margin = 24.0 / s.gamma();
        for (double t : {c.t0, S_max}) {
            double x = s.center(t);
            if (std::fabs(x) > grid.half_width - margin)
                throw ConfigError(fmt::format(
                    "construction.solitons[{}]: center {:.3g} at t = {:.3g} leaves the box (|x| <= L - {:.3g} needed)",
                    i, x, t, margin));
        }
    }
    if (!(c.damping > 0.0 && c.damping <= 1.0)) throw ConfigError("construction.damping must lie in (0, 1]");
    if (c.sample_stride < 1) throw ConfigError("construction.sample_stride must be at least 1");
    if (c.bisection_iters < 1 || c.fixed_point_iters < 1) throw ConfigError("construction iteration caps must be positive");
    if (c.scan_points < 2) throw ConfigError("construction.scan_points must be at least 2");
    if (c.dt < 0.0 || c.sigma < 0.0) throw ConfigError("construction.dt and construction.sigma must be >= 0");
    const auto& a = analysis;
    if (a.delta != 0.0 && !(a.delta > 0.0 && a.delta < 0.25)) throw ConfigError("analysis.delta must lie in (0, 1/4)");
    if (!(a.lambda_exp > 1.0)) throw ConfigError("analysis.lambda_exp must exceed 1");
    if (a.gamma < 0.0) throw ConfigError("analysis.gamma must be >= 0");
    if (!(a.factor >= 1.0)) throw ConfigError("analysis.factor must be >= 1");
    if (!(a.plateau_tol >= 0.0) || !(a.decay_tol >= 0.0)) throw ConfigError("analysis tolerances must be >= 0");
}

ExperimentConfig ExperimentConfig::sweep_member(size_t k) const {
    if (sweep.empty()) throw ConfigError("config has no sweep section");
    if (k >= sweep.values.size()) throw ConfigError(fmt::format("sweep member {} out of range", k));
    json j = to_json();
    j.erase("sweep");
    json::json_pointer ptr;
    try {
        ptr = json::json_pointer(sweep.parameter);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("sweep.parameter: {}", e.what()));
    }
    // Only existing fields may be swept, so a typo cannot add an unknown key
    // that the strict reader would reject with a confusing message.
    if (!j.contains(ptr)) throw ConfigError(fmt::format("sweep.parameter: {} names no config field", sweep.parameter));
    j[ptr] = sweep.values[k];
    ExperimentConfig out = from_json(j, fmt::format("sweep[{}]", k));
    out.output_dir = output_dir;
    return out;
}

Vec ExperimentConfig::spectrum_betas() const {
    if (!spectrum.betas.empty()) return spectrum.betas;
    Vec b;
    for (const auto& s : construction.specs) b.push_back(s.beta);
    if (b.empty()) b.push_back(0.0);
    return b;
}

int threads_from_env(int requested) {
    if (const char* s = std::getenv("NLKG_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(s, &end, 10);
        if (end != s && *end == '\0' && v > 0) {
            int cap = static_cast<int>(std::min<long>(v, 1024));
            return requested > 0 ? std::min(requested, cap) : cap;
        }
    }
    return requested;
}

}  // namespace nlkg
