#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kgl/error.hpp"
#include "kgl/io.hpp"
#include "kgl/legendre.hpp"
#include "kgl/lines.hpp"

using namespace kgl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("kgl_io_" + std::to_string(std::hash<const void*>{}(this)));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool same_bits(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

TEST_CASE("field round trip keeps values, mask, atoms and label") {
    TempDir tmp;
    auto g = SurfaceGrid::torus(16, 2.0);
    auto u = green_potential(g, dirac_measure(*g, g->index(3, 5)));
    u.set_label("dirac");
    write_field(tmp.path / "u", u);
    auto v = read_field(tmp.path / "u");
    REQUIRE(v.size() == u.size());
    bool same = true;
    for (std::size_t x = 0; x < u.size(); ++x) same = same && same_bits(u[x], v[x]) && u.masked(x) == v.masked(x);
    CHECK(same);
    CHECK(u.any_bottom());
    CHECK(v.label() == "dirac");
    REQUIRE(v.atoms().size() == u.atoms().size());
    CHECK(v.atoms()[0].weight == u.atoms()[0].weight);
    CHECK(v.grid().total_volume() == 2.0);
    // the payload is exactly one float64 per node
    CHECK(fs::file_size(tmp.path / "u.bin") == 8 * u.size());
}

TEST_CASE("curve and test-line bundles round trip") {
    TempDir tmp;
    auto g = SurfaceGrid::sphere(32);
    auto p0 = divisor_potential(g, {{{0.5, 0.0}, 1}});
    auto p1 = divisor_potential(g, {{{-2.0, 0.0}, 1}});
    const auto line = build_max_line(p0, p1, Axis::covering(-3.0, 3.0, 0.5));
    const auto dual = legendre(line, {.tau = Axis::covering(-0.5, 1.5, 0.25)});

    write_bundle(tmp.path / "line", line);
    write_bundle(tmp.path / "dual", dual);
    const auto l2 = read_curve_bundle(tmp.path / "line");
    const auto d2 = read_test_line_bundle(tmp.path / "dual");

    CHECK(l2.t.first == line.t.first);
    CHECK(l2.t.count == line.t.count);
    CHECK(l2.kind == line.kind);
    CHECK(l2.label == line.label);
    double e = 0.0;
    for (std::size_t k = 0; k < line.t.size(); ++k)
        for (std::size_t x = 0; x < g->node_count(); ++x) e = std::max(e, std::abs(line.slices[k][x] - l2.slices[k][x]));
    CHECK(e == 0.0);
    // slices read back share one grid object
    CHECK(l2.slices[0].grid_ptr() == l2.slices[1].grid_ptr());

    CHECK(d2.tau_minus == dual.tau_minus);
    CHECK(d2.tau_plus == dual.tau_plus);
    for (std::size_t k = 0; k < dual.slices.size(); ++k) CHECK(d2.present(k) == dual.present(k));

    const std::size_t nodes[] = {0, 17, 100};
    write_profiles_csv(tmp.path / "profiles.csv", dual, nodes);
    std::ifstream in(tmp.path / "profiles.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "tau,node_0,node_17,node_100");
    std::size_t rows = 0;
    for (std::string s; std::getline(in, s);) ++rows;
    CHECK(rows == dual.tau.size());

    write_field_csv(tmp.path / "u0.csv", line.slices[0]);
    CHECK(fs::file_size(tmp.path / "u0.csv") > 0);
}

TEST_CASE("io errors") {
    TempDir tmp;
    CHECK_THROWS_AS(read_field(tmp.path / "missing"), Error);
    std::ofstream(tmp.path / "bad.json") << "{ not json";
    try {
        read_field(tmp.path / "bad");
        FAIL("expected an io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
    // a header whose payload is short
    auto g = SurfaceGrid::torus(8);
    write_field(tmp.path / "f", PotentialField::constant(g, 1.0));
    fs::resize_file(tmp.path / "f.bin", 16);
    CHECK_THROWS_AS(read_field(tmp.path / "f"), Error);
    CHECK_THROWS_AS(grid_from_descriptor({{"kind", "cube"}, {"N", 4}}), Error);
}
