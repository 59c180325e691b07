#include "nlkg/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

namespace nlkg {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() { return "nlkg 1.0.0"; }

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 16);
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = is.gcount();
        if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    }
    return static_cast<std::uint32_t>(crc);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    os << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
}

void write_columns(const std::string& path, const std::vector<std::string>& names, const std::vector<Vec>& cols) {
    if (names.size() != cols.size()) throw ConfigError("write_columns: one name per column required");
    size_t rows = cols.empty() ? 0 : cols.front().size();
    for (const auto& c : cols)
        if (c.size() != rows) throw ConfigError("write_columns: columns differ in length");
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    for (size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
    os << '\n';
    for (size_t i = 0; i < rows; ++i) {
        for (size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << fmt::format("{:.17g}", cols[k][i]);
        os << '\n';
    }
}

void write_snapshot_series(const std::string& path, const std::vector<FieldState>& states, const Grid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    for (const auto& s : states) write_snapshot(os, s, grid);
    if (!os) throw ConfigError("write failed: " + path);
}

std::vector<FieldState> read_snapshot_series(const std::string& path, Grid* grid_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open snapshot series " + path);
    std::vector<FieldState> out;
    Grid first;
    while (is.peek() != std::char_traits<char>::eof()) {
        Grid g;
        out.push_back(read_snapshot(is, path, &g));
        if (out.size() == 1)
            first = g;
        else if (!(g == first))
            throw ConfigError(fmt::format("{}: record {} uses a different grid", path, out.size() - 1));
    }
    if (grid_out) *grid_out = first;
    return out;
}

namespace {

const std::vector<std::pair<std::string, SpectralBundle::Profile>>& bundle_profiles() {
    using P = SpectralBundle::Profile;
    static const std::vector<std::pair<std::string, P>> list = {
        {"Zp", P::Zp}, {"Zm", P::Zm}, {"Yp", P::Yp}, {"Ym", P::Ym}, {"Z0", P::Z0}, {"dR", P::dR}, {"R", P::R}};
    return list;
}

FieldState& profile_slot(SpectralBundle& b, SpectralBundle::Profile p) {
    using P = SpectralBundle::Profile;
    switch (p) {
        case P::Zp: return b.Zp;
        case P::Zm: return b.Zm;
        case P::Yp: return b.Yp;
        case P::Ym: return b.Ym;
        case P::Z0: return b.Z0;
        case P::dR: return b.dR;
        case P::R: break;
    }
    return b.R;
}

}  // namespace

std::vector<std::string> write_bundle(const std::string& stem, const SpectralBundle& b) {
    const std::string meta = stem + ".json", blob = stem + ".bin";
    std::vector<FieldState> states;
    json order = json::array(), norms = json::object();
    for (const auto& [name, p] : bundle_profiles()) {
        order.push_back(name);
        states.push_back(b.centered(p));
        norms[name] = l2_norm(b.centered(p), b.grid);
    }
    states.emplace_back(b.grid.n, 0.0);
    states.back().u1 = b.Qb;
    order.push_back("Qb");
    write_snapshot_series(blob, states, b.grid);

    json j;
    j["grid"] = {{"half_width", b.grid.half_width}, {"n", b.grid.n}};
    j["beta"] = b.beta;
    j["gamma"] = b.gamma;
    j["lambda0"] = b.lambda0;
    j["e_beta"] = b.e;
    j["kappa"] = b.kappa;
    j["scale"] = b.scale;
    j["nu"] = b.nu;
    j["mu"] = b.mu;
    j["residuals"] = {{"plus", b.res_plus}, {"minus", b.res_minus}, {"kernel", b.res_kernel}};
    j["l2_norms"] = norms;
    j["profiles"] = order;
    j["profile_file"] = fs::path(blob).filename().string();
    j["profile_crc32"] = file_crc32(blob);
    write_json(meta, j);
    return {meta, blob};
}

SpectralBundle read_bundle(const std::string& stem) {
    json j = read_json(stem + ".json");
    const std::string blob = stem + ".bin";
    try {
        if (file_crc32(blob) != j.at("profile_crc32").get<std::uint32_t>())
            throw ConfigError(blob + ": checksum mismatch (bundle corrupted)");
        SpectralBundle b;
        b.grid = Grid{j.at("grid").at("half_width").get<double>(), j.at("grid").at("n").get<int>()};
        b.beta = j.at("beta");
        b.gamma = j.at("gamma");
        b.lambda0 = j.at("lambda0");
        b.e = j.at("e_beta");
        b.kappa = j.at("kappa");
        b.scale = j.at("scale");
        b.nu = j.at("nu");
        b.mu = j.at("mu");
        b.res_plus = j.at("residuals").at("plus");
        b.res_minus = j.at("residuals").at("minus");
        b.res_kernel = j.at("residuals").at("kernel");
        Grid g;
        auto states = read_snapshot_series(blob, &g);
        if (!(g == b.grid)) throw ConfigError(blob + ": grid differs from the metadata");
        const auto& list = bundle_profiles();
        if (states.size() != list.size() + 1) throw ConfigError(blob + ": wrong number of profiles");
        for (size_t k = 0; k < list.size(); ++k) profile_slot(b, list[k].second) = states[k];
        b.Qb = states.back().u1;
        // Yp_ko/Ym_ko are not stored; they are diagnostics of the bundle build.
        return b;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}.json: {}", stem, e.what()));
    }
}

void RunManifest::add_file(const std::string& relative, const std::string& kind) {
    fs::path full = fs::path(dir_) / relative;
    Entry e{relative, kind, file_crc32(full.string()), fs::file_size(full)};
    for (auto& f : files_)
        if (f.path == relative) {
            f = e;
            return;
        }
    files_.push_back(e);
}

void RunManifest::set_stage(const std::string& name, const std::string& status) {
    for (auto& s : stages_)
        if (s.first == name) {
            s.second = status;
            return;
        }
    stages_.emplace_back(name, status);
}

json RunManifest::to_json() const {
    json files = json::array();
    for (const auto& f : files_)
        files.push_back({{"path", f.path}, {"kind", f.kind}, {"crc32", fmt::format("{:08x}", f.crc)}, {"bytes", f.bytes}});
    json stages = json::array();
    for (const auto& [name, status] : stages_) stages.push_back({{"name", name}, {"status", status}});
    return {{"command", command_},
            {"config_hash", config_hash_},
            {"versions", {{"nlkg", version()}, {"fmt", FMT_VERSION}, {"zlib", ZLIB_VERSION}}},
            {"files", files},
            {"stages", stages}};
}

void RunManifest::write() const { write_json((fs::path(dir_) / "manifest.json").string(), to_json()); }

RunManifest RunManifest::load(const std::string& dir) {
    json j = read_json((fs::path(dir) / "manifest.json").string());
    RunManifest m(dir);
    try {
        m.command_ = j.at("command");
        m.config_hash_ = j.at("config_hash");
        for (const auto& f : j.at("files")) {
            Entry e;
            e.path = f.at("path");
            e.kind = f.at("kind");
            e.crc = static_cast<std::uint32_t>(std::stoul(f.at("crc32").get<std::string>(), nullptr, 16));
            e.bytes = f.at("bytes");
            m.files_.push_back(e);
        }
        for (const auto& s : j.at("stages")) m.stages_.emplace_back(s.at("name"), s.at("status"));
    } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}/manifest.json: {}", dir, e.what()));
    }
    return m;
}

std::vector<std::string> RunManifest::verify() const {
    std::vector<std::string> problems;
    for (const auto& f : files_) {
        fs::path full = fs::path(dir_) / f.path;
        if (!fs::exists(full)) {
            problems.push_back(f.path + ": missing");
            continue;
        }
        if (fs::file_size(full) != f.bytes) problems.push_back(f.path + ": size changed");
        if (file_crc32(full.string()) != f.crc) problems.push_back(f.path + ": checksum mismatch");
    }
    return problems;
}

}  // namespace nlkg
