#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kgl/error.hpp"
#include "kgl/experiment.hpp"

namespace kgl {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> schema{
    {"experiment", {"name", "description", "expect"}},
    {"surface", {"kind", "N", "V"}},
    {"construction", {"type", "line", "points", "mu0", "mu1", "mu0_y", "mu1_y", "pairs", "curvature"}},
    {"window", {"T", "dt", "tau_min", "tau_max", "dtau"}},
    {"checks", {"run"}},
    {"tolerances",
     {"hma", "hma_order", "exclusion_rings", "hma_t_range", "speed", "speed_p", "mass_fraction", "slope", "slope_T",
      "energy_chord", "parallel", "parallel_slack", "classify_linearity", "classify_g", "g_recovery", "product", "envelope"}},
    {"fifth_postulate", {"u", "shift", "stride", "tol_env"}},
    {"parallel", {"g_scale"}},
};

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, sep);)
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

// "section.key" -> line number, for diagnostics the tree cannot give
std::map<std::string, int> key_lines(const fs::path& file) {
    std::map<std::string, int> lines;
    std::ifstream in(file);
    std::string section;
    int n = 0;
    for (std::string l; std::getline(in, l);) {
        ++n;
        l = trim(l);
        if (l.empty() || l[0] == ';' || l[0] == '#') continue;
        if (l.front() == '[' && l.back() == ']') {
            section = trim(l.substr(1, l.size() - 2));
            lines.emplace(section, n);
            continue;
        }
        if (auto eq = l.find('='); eq != std::string::npos) lines.emplace(section + "." + trim(l.substr(0, eq)), n);
    }
    return lines;
}

class Reader {
public:
    Reader(fs::path file, pt::ptree tree) : file_(std::move(file)), tree_(std::move(tree)), lines_(key_lines(file_)) {}

    [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
        std::string loc = file_.string();
        if (auto it = lines_.find(where); it != lines_.end()) loc += ":" + std::to_string(it->second);
        throw Error(ErrorKind::usage, loc + ": " + msg);
    }

    void validate() const {
        for (const auto& [section, body] : tree_) {
            auto it = schema.find(section);
            if (body.empty() && !body.data().empty()) fail(section, "key '" + section + "' outside any section");
            if (it == schema.end()) fail(section, "unknown section [" + section + "]");
            for (const auto& [key, _] : body)
                if (!it->second.contains(key)) fail(section + "." + key, "unknown key '" + key + "' in [" + section + "]");
        }
    }

    bool has(const std::string& path) const { return tree_.get_optional<std::string>(path).has_value(); }

    std::string str(const std::string& path) const {
        auto v = tree_.get_optional<std::string>(path);
        if (!v) fail(path.substr(0, path.find('.')), "missing required field " + path);
        return trim(*v);
    }
    std::string str(const std::string& path, const std::string& fallback) const {
        return has(path) ? str(path) : fallback;
    }

    double real(const std::string& path, double fallback) const {
        if (!has(path)) return fallback;
        const auto s = str(path);
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        fail(path, path + ": expected a number, got '" + s + "'");
    }

    long integer(const std::string& path, long fallback, long lo) const {
        if (!has(path)) return fallback;
        const auto s = str(path);
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used == s.size() && v >= lo) return v;
        } catch (const std::exception&) {
        }
        fail(path, path + ": expected an integer >= " + std::to_string(lo) + ", got '" + s + "'");
    }

    MeasureSpec measure(const std::string& path) const {
        const auto words = split(str(path), ' ');
        MeasureSpec m;
        try {
            if (words.size() == 3 && words[0] == "dirac") {
                m.kind = MeasureSpec::Kind::dirac;
                m.x = std::stod(words[1]);
                m.y = std::stod(words[2]);
                return m;
            }
            if (words.size() == 2 && words[0] == "cantor") {
                m.kind = MeasureSpec::Kind::cantor;
                m.depth = std::stoi(words[1]);
                return m;
            }
        } catch (const std::exception&) {
        }
        fail(path, path + ": expected 'dirac <x> <y>' or 'cantor <depth>'");
    }

    std::vector<DivisorPoint> points(const std::string& path) const {
        std::vector<DivisorPoint> out;
        for (const auto& item : split(str(path), ';')) {
            const auto w = split(item, ' ');
            try {
                if (w.size() == 2 || w.size() == 3) {
                    out.push_back({{std::stod(w[0]), std::stod(w[1])}, w.size() == 3 ? std::stoi(w[2]) : 1});
                    continue;
                }
            } catch (const std::exception&) {
            }
            fail(path, path + ": expected '<re> <im> [multiplicity]' items separated by ';'");
        }
        return out;
    }

private:
    fs::path file_;
    pt::ptree tree_;
    std::map<std::string, int> lines_;
};

}  // namespace

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names{
        "hma_residual",   "hma_refinement",  "dp_speed_constancy", "zero_mass_line_check", "volume_identity_check",
        "slope_formula_check", "energy_affine", "lse_parallel",   "classify_riemann",     "parallel_from_g",
        "fifth_postulate_check", "product_line"};
    return names;
}

ExperimentConfig load_experiment(const fs::path& file) {
    pt::ptree tree;
    try {
        pt::read_ini(file.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::usage, e.filename() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    const Reader r(file, tree);
    r.validate();

    ExperimentConfig c;
    c.source = file;
    c.name = r.str("experiment.name");
    c.description = r.str("experiment.description", "");
    const auto expect = r.str("experiment.expect", "pass");
    if (expect != "pass" && expect != "fail") r.fail("experiment.expect", "expect must be 'pass' or 'fail'");
    c.expect_pass = expect == "pass";

    const auto kind = r.str("surface.kind");
    if (kind == "torus")
        c.surface = SurfaceKind::torus;
    else if (kind == "sphere")
        c.surface = SurfaceKind::sphere_chart;
    else
        r.fail("surface.kind", "surface.kind must be 'torus' or 'sphere'");
    c.N = static_cast<int>(r.integer("surface.N", 64, 4));
    c.V = r.real("surface.V", 1.0);
    if (!(c.V > 0.0)) r.fail("surface.V", "surface.V must be positive");

    c.construction = r.str("construction.type");
    if (c.construction == "divisor_pair") {
        if (c.surface != SurfaceKind::sphere_chart) r.fail("construction.type", "divisor_pair needs surface.kind = sphere");
        c.points = r.points("construction.points");
        if (c.points.size() != 2) r.fail("construction.points", "divisor_pair needs exactly two points");
        c.line = r.str("construction.line", "max");
        if (c.line != "max" && c.line != "lse") r.fail("construction.line", "construction.line must be 'max' or 'lse'");
    } else if (c.construction == "measure_pair" || c.construction == "product") {
        if (c.surface != SurfaceKind::torus) r.fail("construction.type", c.construction + " needs surface.kind = torus");
        c.mu0 = r.measure("construction.mu0");
        c.mu1 = r.measure("construction.mu1");
        if (c.construction == "product") {
            c.mu0_y = r.measure("construction.mu0_y");
            c.mu1_y = r.measure("construction.mu1_y");
            c.pairs = static_cast<std::size_t>(r.integer("construction.pairs", 64, 1));
        }
    } else if (c.construction == "quadratic") {
        c.curvature = r.real("construction.curvature", 1.0);
    } else {
        r.fail("construction.type", "unknown construction '" + c.construction +
                                        "' (divisor_pair, measure_pair, product, quadratic)");
    }

    c.T = r.real("window.T", default_T);
    c.dt = r.real("window.dt", default_dt);
    c.tau_min = r.real("window.tau_min", -2.0);
    c.tau_max = r.real("window.tau_max", 3.0);
    c.dtau = r.real("window.dtau", default_dtau);
    if (!(c.T > 0 && c.dt > 0 && c.dtau > 0 && c.tau_min < c.tau_max)) r.fail("window", "window values out of range");
    c.verify.legendre.tau = Axis::covering(c.tau_min, c.tau_max, c.dtau);

    c.checks = split(r.str("checks.run"), ',');
    if (c.checks.empty()) r.fail("checks.run", "checks.run lists no check");
    for (const auto& name : c.checks)
        if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
            r.fail("checks.run", "unknown check '" + name + "'");

    auto& v = c.verify;
    v.hma_tol = r.real("tolerances.hma", v.hma_tol);
    v.exclusion_rings = static_cast<int>(r.integer("tolerances.exclusion_rings", v.exclusion_rings, 0));
    v.hma_t_range = r.real("tolerances.hma_t_range", v.hma_t_range);
    v.speed_tol = r.real("tolerances.speed", v.speed_tol);
    v.speed_p = r.real("tolerances.speed_p", v.speed_p);
    if (!(v.speed_p >= 1.0)) r.fail("tolerances.speed_p", "tolerances.speed_p must be at least 1");
    v.mass_fraction = r.real("tolerances.mass_fraction", v.mass_fraction);
    v.slope_tol = r.real("tolerances.slope", v.slope_tol);
    v.slope_T = r.real("tolerances.slope_T", c.T);
    for (const auto& [key, fallback] : std::map<std::string, double>{{"hma_order", 1.5},
                                                                    {"energy_chord", 5e-3},
                                                                    {"parallel", 1e-6},
                                                                    {"parallel_slack", 0.03},
                                                                    {"classify_linearity", 5e-3},
                                                                    {"classify_g", 5e-3},
                                                                    {"g_recovery", 1e-2},
                                                                    {"product", 0.0},
                                                                    {"envelope", 1e-6}})
        c.tolerances[key] = r.real("tolerances." + key, fallback);

    c.fifth_u = r.str("fifth_postulate.u", "zero");
    if (c.fifth_u != "zero" && c.fifth_u != "v0") r.fail("fifth_postulate.u", "fifth_postulate.u must be 'zero' or 'v0'");
    c.fifth_shift = r.real("fifth_postulate.shift", 0.0);
    c.fifth_stride = static_cast<std::size_t>(r.integer("fifth_postulate.stride", 1, 1));
    c.tol_env = r.real("fifth_postulate.tol_env", 1e-8);
    c.g_scale = r.real("parallel.g_scale", 1.0);
    return c;
}

std::vector<ExperimentInfo> list_experiments(const fs::path& dir) {
    std::vector<ExperimentInfo> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (e.path().extension() != ".ini") continue;
        auto c = load_experiment(e.path());
        out.push_back({c.name, c.description, e.path()});
    }
    if (ec) throw Error(ErrorKind::io, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

}  // namespace kgl
