#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "s3ps/io.hpp"

#include "oracles.hpp"

using namespace s3ps;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("s3ps_io_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("raw float round trip is bit-identical") {
    TempDir td;
    oracle::Rng rng(3);
    Raster r = oracle::random_raster(13, 9, 3, rng);
    r.level = 1;
    // snap samples to float32 so the on-disk format represents them exactly
    for (auto& band : r.bands)
        for (double& v : band.v) v = double(float(v));

    const std::string path = td.file("a.raw");
    save_raster_raw(r, path, 11);
    const RasterFile lf = load_raster_raw(path);
    CHECK(lf.bit_depth == 11);
    CHECK(lf.raster.level == 1);
    REQUIRE(lf.raster.nbands() == 3);
    for (int b = 0; b < 3; ++b)
        for (size_t i = 0; i < r.bands[b].v.size(); ++i)
            CHECK(lf.raster.bands[b].v[i] == r.bands[b].v[i]);
}

TEST_CASE("16-bit pgm and pam round trips preserve integers") {
    TempDir td;
    oracle::Rng rng(4);
    Raster r(21, 17, 1);
    for (double& v : r.bands[0].v) v = double(rng.uniform_int(0, 65535));
    save_raster(r, td.file("g.pgm"), 16);
    const RasterFile lg = load_raster(td.file("g.pgm"));
    CHECK(lg.bit_depth == 16);
    CHECK(lg.raster.width() == 21);
    CHECK(lg.raster.height() == 17);
    CHECK(lg.raster.nbands() == 1);
    for (size_t i = 0; i < r.bands[0].v.size(); ++i) CHECK(lg.raster.bands[0].v[i] == r.bands[0].v[i]);

    Raster m(7, 5, 4);
    for (auto& band : m.bands)
        for (double& v : band.v) v = double(rng.uniform_int(0, 65535));
    save_raster(m, td.file("m.pam"), 16);
    const RasterFile lm = load_raster(td.file("m.pam"));
    REQUIRE(lm.raster.nbands() == 4);
    for (int b = 0; b < 4; ++b)
        for (size_t i = 0; i < m.bands[b].v.size(); ++i)
            CHECK(lm.raster.bands[b].v[i] == m.bands[b].v[i]);
}

TEST_CASE("malformed and truncated files raise structured errors") {
    TempDir td;
    CHECK_THROWS_AS(load_raster(td.file("missing.raw")), Error);

    atomic_write_bytes(td.file("bad.raw"), std::string(16, '\0'));
    atomic_write_bytes(raw_header_path(td.file("bad.raw")), "width=2\nheight=2\n");
    CHECK_THROWS_AS(load_raster(td.file("bad.raw")), Error);  // header lacks keys

    atomic_write_bytes(raw_header_path(td.file("bad.raw")),
                       "width=2\nheight=2\nbands=1\nlevel=0\nbit_depth=0\n");
    CHECK(load_raster(td.file("bad.raw")).raster.width() == 2);
    atomic_write_bytes(td.file("bad.raw"), std::string(15, '\0'));  // truncated
    CHECK_THROWS_AS(load_raster(td.file("bad.raw")), Error);

    atomic_write_bytes(td.file("junk.pgm"), "P6\n2 2\n255\nxxxxxxxxxxxx");
    CHECK_THROWS_AS(load_raster(td.file("junk.pgm")), Error);
    atomic_write_bytes(td.file("short.pgm"), "P5\n4 4\n255\nxx");
    CHECK_THROWS_AS(load_raster(td.file("short.pgm")), Error);
    CHECK_THROWS_AS(load_raster(td.file("who.knows")), Error);  // unknown format
}

TEST_CASE("pgm writer rejects out-of-range samples and extra bands") {
    TempDir td;
    Raster r(2, 2, 1);
    r.bands[0].at(0, 0) = 70000.0;
    CHECK_THROWS_AS(save_raster(r, td.file("x.pgm"), 16), Error);
    Raster rgb(2, 2, 3, 0, 1.0);
    CHECK_THROWS_AS(save_raster(rgb, td.file("x.pgm"), 16), Error);
}

TEST_CASE("heatmap output clamps to the 8-bit range") {
    TempDir td;
    Plane p(3, 1);
    p.at(0, 0) = -0.5;
    p.at(1, 0) = 0.5;
    p.at(2, 0) = 1.5;
    save_heatmap_pgm(p, td.file("h.pgm"));
    const RasterFile h = load_raster(td.file("h.pgm"));
    CHECK(h.raster.bands[0].at(0, 0) == 0.0);
    CHECK(h.raster.bands[0].at(1, 0) == 128.0);  // 0.5*255 rounds up
    CHECK(h.raster.bands[0].at(2, 0) == 255.0);
}

TEST_CASE("11-bit pgm files load with their declared depth and range checks") {
    TempDir td;
    Raster r(3, 2, 1);
    double vals[] = {0, 1000, 2047, 512, 7, 1};
    for (size_t i = 0; i < 6; ++i) r.bands[0].v[i] = vals[i];
    save_raster(r, td.file("eleven.pgm"), 11);
    const RasterFile lf = load_raster(td.file("eleven.pgm"));
    CHECK(lf.bit_depth == 11);
    for (size_t i = 0; i < 6; ++i) CHECK(lf.raster.bands[0].v[i] == vals[i]);
    // normalize maps the declared maximum to 1
    CHECK(normalize(lf.raster, lf.bit_depth).bands[0].v[2] == 1.0);

    // a sample above the declared maxval is a data error, not a clip
    std::string bytes = "P5\n1 1\n2047\n";
    bytes.push_back(char(0x0f));
    bytes.push_back(char(0xff));  // 4095 > 2047
    atomic_write_bytes(td.file("liar.pgm"), bytes);
    CHECK_THROWS_AS(load_raster(td.file("liar.pgm")), Error);
}
