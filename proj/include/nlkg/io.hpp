#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlkg/spectral.hpp"

namespace nlkg {

/// zlib crc32 of a whole file. Throws ConfigError when it cannot be read.
std::uint32_t file_crc32(const std::string& path);

/// Pretty JSON with a trailing newline; numbers keep full precision.
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Columns of equal length written as CSV with %.17g values.
void write_columns(const std::string& path, const std::vector<std::string>& names, const std::vector<Vec>& cols);

/// Concatenated snapshot records, one per state.
void write_snapshot_series(const std::string& path, const std::vector<FieldState>& states, const Grid& grid);
std::vector<FieldState> read_snapshot_series(const std::string& path, Grid* grid_out = nullptr);

/// Bundle as `<stem>.json` (scalars, norms, residuals and profile order) plus
/// `<stem>.bin` (the profiles Zp, Zm, Yp, Ym, Z0, dR, R as snapshot records).
/// Returns both paths.
std::vector<std::string> write_bundle(const std::string& stem, const SpectralBundle& b);
SpectralBundle read_bundle(const std::string& stem);

/// Index of one run directory: every artifact with its crc32 and size,
/// per-stage status, config hash and versions.
class RunManifest {
public:
    explicit RunManifest(std::string dir = ".") : dir_(std::move(dir)) {}

    const std::string& dir() const { return dir_; }
    void set_config_hash(const std::string& h) { config_hash_ = h; }
    void set_command(const std::string& c) { command_ = c; }
    /// Registers a file by its path relative to the run directory.
    void add_file(const std::string& relative, const std::string& kind);
    void set_stage(const std::string& name, const std::string& status);

    nlohmann::json to_json() const;
    /// Writes manifest.json into the run directory.
    void write() const;
    static RunManifest load(const std::string& dir);

    /// Lists missing files and checksum or size mismatches; empty when intact.
    std::vector<std::string> verify() const;

    struct Entry {
        std::string path, kind;
        std::uint32_t crc = 0;
        std::uintmax_t bytes = 0;
    };
    const std::vector<Entry>& files() const { return files_; }

private:
    std::string dir_, config_hash_, command_;
    std::vector<Entry> files_;
    std::vector<std::pair<std::string, std::string>> stages_;
};

/// Library version string used in manifests and reports.
const char* version();

}  // namespace nlkg
