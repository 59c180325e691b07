#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nlkg/io.hpp"

using namespace nlkg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& f) const { return (path / f).string(); }
};

void poke(const std::string& path, std::streamoff at, const std::string& bytes) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(at);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("crc32 of a known string") {
    TempDir d("nlkg_io_crc");
    std::ofstream(d.file("x")) << "123456789";
    CHECK(file_crc32(d.file("x")) == 0xCBF43926u);
}

TEST_CASE("columns are written with full precision") {
    TempDir d("nlkg_io_cols");
    write_columns(d.file("c.csv"), {"t", "v"}, {{0.1, 0.2}, {1.0 / 3.0, -1e-300}});
    std::ifstream is(d.file("c.csv"));
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "t,v");
    CHECK(row == "0.10000000000000001,0.33333333333333331");
    CHECK_THROWS_AS(write_columns(d.file("bad.csv"), {"a"}, {{1.0}, {2.0}}), ConfigError);
}

TEST_CASE("snapshot series keep order and grid") {
    TempDir d("nlkg_io_series");
    Grid g{5.0, 16};
    std::vector<FieldState> states;
    for (int k = 0; k < 3; ++k) {
        FieldState s(g.n, 0.5 * k);
        s.u1[k] = k + 1.0;
        states.push_back(s);
    }
    write_snapshot_series(d.file("s.bin"), states, g);
    Grid back;
    auto got = read_snapshot_series(d.file("s.bin"), &back);
    REQUIRE(got.size() == 3);
    CHECK(back == g);
    CHECK(got[2].t == 1.0);
    CHECK(got[2].u1 == states[2].u1);
    write_snapshot_series(d.file("empty.bin"), {}, g);
    CHECK(read_snapshot_series(d.file("empty.bin")).empty());
}

TEST_CASE("manifest detects changed and missing files") {
    TempDir d("nlkg_io_manifest");
    std::ofstream(d.file("a.txt")) << "alpha";
    std::ofstream(d.file("b.txt")) << "beta";
    RunManifest m(d.path.string());
    m.set_command("test");
    m.set_config_hash("00000000");
    m.add_file("a.txt", "text");
    m.add_file("b.txt", "text");
    m.set_stage("one", "ok");
    m.write();

    RunManifest loaded = RunManifest::load(d.path.string());
    CHECK(loaded.files().size() == 2);
    CHECK(loaded.verify().empty());
    CHECK(loaded.to_json() == m.to_json());

    poke(d.file("a.txt"), 0, "A");
    fs::remove(d.file("b.txt"));
    auto problems = loaded.verify();
    REQUIRE(problems.size() == 2);
    CHECK(problems[0] == "a.txt: checksum mismatch");
    CHECK(problems[1] == "b.txt: missing");
}

TEST_CASE("bundles round trip and reject corruption") {
    TempDir d("nlkg_io_bundle");
    Nonlinearity nl = Nonlinearity::power(3.0);
    GroundState gs(nl);
    Grid g{30.0, 256};
    EigenPair ep = ground_eigenpair(nl, gs, g);
    GroundMode mode(ep, gs);
    SpectralBundle b = boosted_pairs(mode, gs, 0.3, g, BundleOptions{1e-3, 1e-3});
    auto files = write_bundle(d.file("b0"), b);
    CHECK(files.size() == 2);
    SpectralBundle r = read_bundle(d.file("b0"));
    CHECK(r.e == b.e);
    CHECK(r.Zp.u1 == b.Zp.u1);
    CHECK(r.Ym.u2 == b.Ym.u2);
    CHECK(r.Qb == b.Qb);
    CHECK(r.grid == g);

    poke(d.file("b0.bin"), 100, "XXXX");
    CHECK_THROWS_WITH_AS(read_bundle(d.file("b0")), doctest::Contains("checksum mismatch"), ConfigError);
}
