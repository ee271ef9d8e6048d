#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "kgl/error.hpp"
#include "kgl/io.hpp"

namespace kgl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::io, "cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, p.string() + ": " + e.what());
    }
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json axis_json(const Axis& a) { return {{"first", a.first}, {"count", a.count}, {"per_unit", a.per_unit}}; }
Axis axis_from(const json& j) {
    return Axis{j.at("first").get<long>(), j.at("count").get<std::size_t>(), j.at("per_unit").get<long>()};
}

fs::path with_suffix(const fs::path& stem, const char* ext) {
    fs::path p = stem;
    p += ext;
    return p;
}

std::string slice_name(std::size_t k) { return "slice_" + std::to_string(k); }

void check_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

GridPtr grid_from_descriptor(const json& d) {
    static std::mutex mu;
    static std::map<std::string, GridPtr> cache;
    const std::string key = d.dump();
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    GridPtr g;
    try {
        const auto kind = d.at("kind").get<std::string>();
        const int N = d.at("N").get<int>();
        if (kind == to_string(SurfaceKind::torus))
            g = SurfaceGrid::torus(N, d.value("V", 1.0));
        else if (kind == to_string(SurfaceKind::sphere_chart))
            g = SurfaceGrid::sphere(N);
        else
            throw Error(ErrorKind::io, "unknown grid kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, std::string("bad grid descriptor: ") + e.what());
    }
    cache.emplace(key, g);
    return g;
}

void write_field(const fs::path& stem, const PotentialField& u) {
    json atoms = json::array();
    for (const auto& a : u.atoms()) atoms.push_back({{"node", a.node}, {"weight", a.weight}});
    const auto bin = with_suffix(stem, ".bin");
    json h{{"grid", u.grid().descriptor()},
           {"label", u.label()},
           {"nodes", u.size()},
           {"mask", u.masked_nodes()},
           {"atoms", atoms},
           {"payload", bin.filename().string()},
           {"dtype", "float64-le"}};
    write_json(with_suffix(stem, ".json"), h);

    std::ofstream out(bin, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + bin.string());
    for (double v : u.values()) {
        const std::uint64_t w = to_le(std::bit_cast<std::uint64_t>(v));
        out.write(reinterpret_cast<const char*>(&w), sizeof w);
    }
    if (!out) throw Error(ErrorKind::io, "short write on " + bin.string());
}

PotentialField read_field(const fs::path& stem) {
    const json h = read_json(with_suffix(stem, ".json"));
    try {
        auto g = grid_from_descriptor(h.at("grid"));
        const auto n = h.at("nodes").get<std::size_t>();
        if (n != g->node_count()) throw Error(ErrorKind::io, "node count does not match the grid");
        const auto bin = stem.parent_path() / h.at("payload").get<std::string>();
        std::ifstream in(bin, std::ios::binary);
        if (!in) throw Error(ErrorKind::io, "cannot open " + bin.string());
        std::vector<double> v(n);
        for (auto& x : v) {
            std::uint64_t w;
            in.read(reinterpret_cast<char*>(&w), sizeof w);
            x = std::bit_cast<double>(to_le(w));
        }
        if (!in) throw Error(ErrorKind::io, "truncated payload " + bin.string());
        PotentialField u(g, std::move(v), h.value("label", std::string{}));
        for (std::size_t x : h.at("mask").get<std::vector<std::size_t>>()) u.set_masked(x);
        std::vector<Atom> atoms;
        for (const auto& a : h.at("atoms")) atoms.push_back({a.at("node").get<std::size_t>(), a.at("weight").get<double>()});
        u.set_atoms(std::move(atoms));
        return u;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, stem.string() + ".json: " + e.what());
    }
}

void write_field_csv(const fs::path& file, const PotentialField& u) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::io, "cannot write " + file.string());
    out.precision(17);
    out << "node,x,y,value,masked\n";
    const auto& g = u.grid();
    for (std::size_t x = 0; x < u.size(); ++x) {
        const auto z = g.coord(x);
        out << x << ',' << z.real() << ',' << z.imag() << ',' << u[x] << ',' << (u.masked(x) ? 1 : 0) << '\n';
    }
}

void write_bundle(const fs::path& dir, const PotentialCurve& curve) {
    check_dir(dir);
    json m{{"type", "curve"},
           {"grid", curve.grid().descriptor()},
           {"t", axis_json(curve.t)},
           {"kind", to_string(curve.kind)},
           {"growth_bound", curve.growth_bound},
           {"label", curve.label}};
    write_json(dir / "manifest.json", m);
    for (std::size_t k = 0; k < curve.slices.size(); ++k) write_field(dir / slice_name(k), curve.slices[k]);
}

void write_bundle(const fs::path& dir, const TestLine& line) {
    check_dir(dir);
    json present = json::array();
    for (std::size_t k = 0; k < line.slices.size(); ++k)
        if (line.present(k)) present.push_back(k);
    json m{{"type", "test_line"},
           {"tau", axis_json(line.tau)},
           {"tau_minus", line.tau_minus},
           {"tau_plus", line.tau_plus},
           {"truncated_taus", line.truncated_taus},
           {"present", present}};
    if (auto g = line.grid_ptr()) m["grid"] = g->descriptor();
    write_json(dir / "manifest.json", m);
    for (std::size_t k = 0; k < line.slices.size(); ++k)
        if (line.present(k)) write_field(dir / slice_name(k), *line.slices[k]);
}

PotentialCurve read_curve_bundle(const fs::path& dir) {
    const json m = read_json(dir / "manifest.json");
    try {
        if (m.at("type") != "curve") throw Error(ErrorKind::io, dir.string() + " does not hold a curve");
        PotentialCurve c;
        c.t = axis_from(m.at("t"));
        const auto kind = m.at("kind").get<std::string>();
        for (auto k : {CurveKind::subgeodesic_candidate, CurveKind::geodesic_candidate, CurveKind::ray})
            if (kind == to_string(k)) c.kind = k;
        c.growth_bound = m.value("growth_bound", 0.0);
        c.label = m.value("label", std::string{});
        for (std::size_t k = 0; k < c.t.size(); ++k) c.slices.push_back(read_field(dir / slice_name(k)));
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, (dir / "manifest.json").string() + ": " + e.what());
    }
}

TestLine read_test_line_bundle(const fs::path& dir) {
    const json m = read_json(dir / "manifest.json");
    try {
        if (m.at("type") != "test_line") throw Error(ErrorKind::io, dir.string() + " does not hold a test line");
        TestLine L;
        L.tau = axis_from(m.at("tau"));
        L.tau_minus = m.at("tau_minus").get<double>();
        L.tau_plus = m.at("tau_plus").get<double>();
        L.truncated_taus = m.value("truncated_taus", std::vector<double>{});
        L.slices.resize(L.tau.size());
        for (std::size_t k : m.at("present").get<std::vector<std::size_t>>()) {
            if (k >= L.slices.size()) throw Error(ErrorKind::io, "slice index out of range in " + dir.string());
            L.slices[k] = read_field(dir / slice_name(k));
        }
        return L;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, (dir / "manifest.json").string() + ": " + e.what());
    }
}

void write_profiles_csv(const fs::path& file, const TestLine& line, std::span<const std::size_t> nodes) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::io, "cannot write " + file.string());
    out.precision(17);
    out << "tau";
    for (std::size_t x : nodes) out << ",node_" << x;
    out << '\n';
    for (std::size_t k = 0; k < line.slices.size(); ++k) {
        out << line.tau[k];
        for (std::size_t x : nodes) out << ',' << (line.present(k) ? (*line.slices[k])[x] : BOTTOM);
        out << '\n';
    }
}

}  // namespace kgl
