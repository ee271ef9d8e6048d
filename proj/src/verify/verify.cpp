#include <algorithm>
#include <cmath>
#include <limits>

#include "kgl/error.hpp"
#include "kgl/verify.hpp"

namespace kgl {

void VerificationReport::set_residual(const std::string& key, double value, double tol) {
    scalars[key] = value;
    tolerances[key] = tol;
}

void VerificationReport::finalize() {
    pass = true;
    for (const auto& [key, tol] : tolerances) {
        const double v = scalars.at(key);
        if (!(v <= tol)) pass = false;
    }
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["pass"] = pass;
    j["scalars"] = nlohmann::json::object();
    for (const auto& [k, v] : scalars) j["scalars"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::to_string(v));
    j["tolerances"] = tolerances;
    j["provenance"] = provenance;
    j["notes"] = notes;
    return j;
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

nlohmann::json axis_json(const Axis& a) {
    return {{"first", a.front()}, {"last", a.back()}, {"step", a.step()}, {"count", a.size()}};
}

nlohmann::json curve_provenance(const PotentialCurve& line) {
    return {{"grid", line.grid().descriptor()}, {"t", axis_json(line.t)}, {"curve", line.label},
            {"kind", to_string(line.kind)}};
}

nlohmann::json line_provenance(const TestLine& tline) {
    nlohmann::json j{{"tau", axis_json(tline.tau)}, {"tau_minus", tline.tau_minus}, {"tau_plus", tline.tau_plus}};
    if (auto g = tline.grid_ptr()) j["grid"] = g->descriptor();
    return j;
}

double mass_or_zero(const std::optional<PotentialField>& s) { return s ? nonpluripolar_mass(*s) : 0.0; }

// marks every node within `rings` of a seed
void dilate(const SurfaceGrid& g, std::vector<std::uint8_t>& mark, int rings) {
    std::vector<std::size_t> seeds;
    for (std::size_t x = 0; x < mark.size(); ++x)
        if (mark[x]) seeds.push_back(x);
    for (std::size_t x : seeds)
        for (std::size_t y : g.neighbourhood(x, rings)) mark[y] = 1;
}

}  // namespace

namespace {

// exclusions shared by every time sample of one line
struct HmaSetup {
    std::vector<std::uint8_t> singular;
    std::vector<double> diff;  ///< φ0 - φ1 for max lines, empty otherwise
};

HmaSetup hma_setup(const PotentialCurve& line, const VerifyOptions& opts) {
    const auto& g = line.grid();
    const std::size_t n = g.node_count();
    HmaSetup s;
    // singular points: masked or infinite nodes of the generators or any slice
    s.singular.assign(n, 0);
    auto mark = [&](const PotentialField& f) {
        for (std::size_t x = 0; x < n; ++x)
            if (f.masked(x) || !std::isfinite(f[x])) s.singular[x] = 1;
    };
    const auto* gen = line.generators.get();
    if (gen) {
        mark(gen->phi0);
        mark(gen->phi1);
    }
    for (const auto& f : line.slices) mark(f);
    dilate(g, s.singular, opts.exclusion_rings);
    if (gen && gen->shape == LineGenerators::Shape::max) {
        s.diff.resize(n);
        for (std::size_t x = 0; x < n; ++x) s.diff[x] = gen->phi0[x] - gen->phi1[x];
    }
    return s;
}

// |R| at time index k (1 <= k < count-1), NaN at excluded nodes
std::vector<double> hma_field(const PotentialCurve& line, std::size_t k, const HmaSetup& s, const VerifyOptions& opts) {
    const auto& g = line.grid();
    const std::size_t n = g.node_count();
    const double dt = line.t.step();
    const auto& um = line.slices[k - 1];
    const auto& u0 = line.slices[k];
    const auto& up = line.slices[k + 1];

    auto excl = s.singular;
    if (!s.diff.empty()) {
        // the t-stencil sees a switch whenever φ0 - φ1 crosses [t - Δt, t + Δt],
        // which can be many cells wide where φ0 - φ1 is flat
        const double band = 2.0 / g.side();
        const double t = line.t[k];
        std::vector<std::uint8_t> locus(n, 0);
        for (std::size_t x = 0; x < n; ++x) {
            const double a = s.diff[x] - t;
            if (!std::isfinite(a)) continue;
            if (std::abs(a) <= band + dt) {
                locus[x] = 1;
                continue;
            }
            // the band can be thinner than a cell; catch sign changes too
            for (const auto& nb : g.stencil(x)) {
                const double b = s.diff[nb.node] - t;
                if (std::isfinite(b) && (a > 0) != (b > 0)) {
                    locus[x] = 1;
                    break;
                }
            }
        }
        dilate(g, locus, opts.exclusion_rings);
        for (std::size_t x = 0; x < n; ++x) excl[x] |= locus[x];
    }

    std::vector<double> udot(n);
    for (std::size_t x = 0; x < n; ++x) udot[x] = (up[x] - um[x]) / (2.0 * dt);
    std::vector<double> r(n, nan);
    for (std::size_t x = 0; x < n; ++x) {
        if (excl[x] || g.is_closure(x) || !u0.stencil_clean(x)) continue;
        double grad2;
        if (!g.chart_gradient_sq(udot, x, grad2)) continue;
        const double uddot = (up[x] - 2.0 * u0[x] + um[x]) / (dt * dt);
        if (!std::isfinite(uddot)) continue;
        const double dens = 1.0 + g.laplacian_at(u0.values(), x);
        r[x] = std::abs(g.hma_coefficient(x) * dens * 0.25 * uddot - grad2 / 16.0);
    }
    return r;
}

}  // namespace

VerificationReport hma_residual(const PotentialCurve& line, const VerifyOptions& opts) {
    VerificationReport rep;
    rep.name = "hma_residual";
    rep.provenance = curve_provenance(line);

    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k + 1 < line.t.size(); ++k)
        if (std::abs(line.t[k]) <= opts.hma_t_range + 1e-12) ks.push_back(k);
    if (ks.empty()) throw Error(ErrorKind::window_too_small, "no interior time sample with both neighbours");

    const auto setup = hma_setup(line, opts);
    double max_r = 0.0, sum_r = 0.0;
    std::size_t used = 0;
    for (std::size_t k : ks) {
        for (double r : hma_field(line, k, setup, opts)) {
            if (std::isnan(r)) continue;
            max_r = std::max(max_r, r);
            sum_r += r;
            ++used;
        }
    }
    rep.scalars["time_samples"] = static_cast<double>(ks.size());
    rep.scalars["evaluations"] = static_cast<double>(used);
    rep.scalars["mean_residual"] = used ? sum_r / static_cast<double>(used) : nan;
    rep.set_residual("max_residual", used ? max_r : nan, opts.hma_tol);
    rep.provenance["exclusion_rings"] = opts.exclusion_rings;
    rep.provenance["t_range"] = opts.hma_t_range;
    if (!used) rep.notes.push_back("no node survived the exclusions");
    rep.finalize();
    return rep;
}

std::vector<double> hma_residual_field(const PotentialCurve& line, double t, const VerifyOptions& opts) {
    const std::size_t k = line.t.find(t);
    if (k == Axis::npos || k == 0 || k + 1 >= line.t.size())
        throw Error(ErrorKind::window_too_small, "t = " + std::to_string(t) + " has no central difference");
    return hma_field(line, k, hma_setup(line, opts), opts);
}

VerificationReport dp_speed_constancy(const PotentialCurve& line, const VerifyOptions& opts) {
    VerificationReport rep;
    rep.name = "dp_speed_constancy";
    rep.provenance = curve_provenance(line);
    rep.provenance["p"] = opts.speed_p;
    const auto& g = line.grid();
    const double p = opts.speed_p;
    if (!(p >= 1.0)) throw Error(ErrorKind::invalid_argument, "speed exponent must be at least 1");
    const double dt = line.t.step();

    std::vector<double> speeds;
    for (double t : {-2.0, 0.0, 2.0}) {
        const std::size_t k = line.t.find(t);
        if (k == Axis::npos || k == 0 || k + 1 >= line.t.size()) {
            rep.notes.push_back("t = " + std::to_string(t) + " has no central difference; skipped");
            continue;
        }
        const auto& u = line.slices[k];
        double acc = 0.0;
        for (std::size_t x = 0; x < g.node_count(); ++x) {
            if (!u.stencil_clean(x)) continue;
            const double v = (line.slices[k + 1][x] - line.slices[k - 1][x]) / (2.0 * dt);
            if (!std::isfinite(v)) continue;
            const double dens = std::max(0.0, 1.0 + g.laplacian_at(u.values(), x));
            acc += std::pow(std::abs(v), p) * dens * g.area(x);
        }
        const double s = std::pow(acc, 1.0 / p);
        rep.scalars["speed_t" + std::to_string(static_cast<int>(t))] = s;
        speeds.push_back(s);
    }
    double dev = nan;
    if (speeds.size() >= 2) {
        const auto [lo, hi] = std::minmax_element(speeds.begin(), speeds.end());
        dev = *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
    }
    rep.set_residual("relative_deviation", dev, opts.speed_tol);
    rep.finalize();
    return rep;
}

VerificationReport zero_mass_line_check(const TestLine& tline, const VerifyOptions& opts, const TestLine* refined) {
    VerificationReport rep;
    rep.name = "zero_mass_line_check";
    rep.provenance = line_provenance(tline);
    if (tline.empty()) throw Error(ErrorKind::empty_domain, "test line has no present slice");
    const double V = tline.grid_ptr()->total_volume();
    const double bound = opts.mass_fraction * V;

    auto worst_interior = [](const TestLine& L, std::size_t& count) {
        double w = 0.0;
        count = 0;
        for (std::size_t k = 0; k < L.slices.size(); ++k) {
            const double tau = L.tau[k];
            if (tau <= L.tau_minus + 1e-9 || tau >= L.tau_plus - 1e-9) continue;
            w = std::max(w, mass_or_zero(L.slices[k]));
            ++count;
        }
        return w;
    };

    std::size_t count = 0;
    const double worst = worst_interior(tline, count);
    rep.scalars["interior_samples"] = static_cast<double>(count);
    if (count == 0) rep.notes.push_back("no τ sample strictly inside (τ⁻, τ⁺); interior condition vacuous");
    rep.set_residual("max_interior_mass", worst, bound);

    if (tline.tau_minus < tline.tau_plus) {
        double e = 0.0;
        for (double tau : {tline.tau_minus, tline.tau_plus}) {
            const auto& s = tline.at(tau);
            e = std::max(e, s ? nonpluripolar_mass(*s) : INFINITY);
        }
        rep.set_residual("max_endpoint_mass", e, bound);
    }

    if (refined) {
        std::size_t rc = 0;
        const double rw = worst_interior(*refined, rc);
        rep.scalars["refined_max_interior_mass"] = rw;
        // roundoff allowance only: masses at the 1e-12 level may jitter
        rep.set_residual("refinement_increase", std::max(0.0, rw - worst), 1e-9 * V);
    }
    rep.finalize();
    return rep;
}

VerificationReport volume_identity_check(const TestLine& tline, const VerifyOptions& opts) {
    VerificationReport rep;
    rep.name = "volume_identity_check";
    rep.provenance = line_provenance(tline);
    if (tline.empty()) throw Error(ErrorKind::empty_domain, "test line has no present slice");
    const double V = tline.grid_ptr()->total_volume();
    const auto [plus, minus] = restrict_to_rays(tline, opts.legendre.mask_rings);
    const std::size_t n = tline.slices.size();

    // the identity holds for a.e. τ; at τ⁻ = τ⁺ both rays keep u_0, so the
    // endpoints are reported but not judged
    double inner = 0.0, outer = 0.0, ends = 0.0;
    std::size_t inner_count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        // minus slot n-1-k holds û⁻ at -τ_k
        const double e = std::abs(mass_or_zero(plus.slices[k]) + mass_or_zero(minus.slices[n - 1 - k]) - V);
        const double tau = tline.tau[k];
        if (tau > tline.tau_minus + 1e-9 && tau < tline.tau_plus - 1e-9) {
            inner = std::max(inner, e);
            ++inner_count;
        } else if (tau < tline.tau_minus - 1e-9 || tau > tline.tau_plus + 1e-9) {
            outer = std::max(outer, e);
        } else {
            ends = std::max(ends, e);
        }
    }
    rep.scalars["interior_samples"] = static_cast<double>(inner_count);
    rep.scalars["endpoint_defect"] = ends;
    rep.set_residual("max_interior_defect", inner, opts.mass_fraction * V);
    rep.set_residual("max_exterior_defect", outer, opts.mass_fraction * V);
    rep.finalize();
    return rep;
}

VerificationReport slope_formula_check(const PotentialCurve& line, const VerifyOptions& opts) {
    VerificationReport rep;
    rep.name = "slope_formula_check";
    rep.provenance = curve_provenance(line);
    const double T = opts.slope_T;
    rep.provenance["T"] = T;
    const double V = line.grid().total_volume();

    const double slope_plus = (ma_energy(line.at(T)) - ma_energy(line.at(T / 2))) / (T / 2);
    const double slope_minus = (ma_energy(line.at(-T)) - ma_energy(line.at(-T / 2))) / (T / 2);

    const auto dual = legendre(line, opts.legendre);
    if (dual.empty()) throw Error(ErrorKind::empty_domain, "the dual test line is empty");
    const auto plus = restrict_to_rays(dual, opts.legendre.mask_rings).first;
    double integral = 0.0;
    double prev = nan;
    for (std::size_t k = 0; k < plus.slices.size() && plus.tau[k] <= dual.tau_plus + 1e-9; ++k) {
        const double f = (mass_or_zero(plus.slices[k]) - V) / V;
        if (k > 0) integral += 0.5 * (prev + f) * plus.tau.step();
        prev = f;
    }
    const double formula = integral + dual.tau_plus;

    rep.scalars["slope_numeric"] = slope_plus;
    rep.scalars["slope_negative_ray"] = slope_minus;
    rep.scalars["slope_formula"] = formula;
    rep.scalars["tau_plus"] = dual.tau_plus;
    rep.set_residual("slope_gap", std::abs(slope_plus - formula), opts.slope_tol);
    rep.set_residual("line_identity_gap", std::abs(slope_plus + slope_minus), opts.slope_tol);
    rep.finalize();
    return rep;
}

double energy_chord_deviation(const PotentialCurve& line, double range) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < line.t.size(); ++k)
        if (std::abs(line.t[k]) <= range + 1e-12) pts.emplace_back(line.t[k], ma_energy(line.slices[k]));
    if (pts.size() < 2) throw Error(ErrorKind::window_too_small, "fewer than two samples in the energy window");
    const auto [ta, ia] = pts.front();
    const auto [tb, ib] = pts.back();
    double dev = 0.0;
    for (const auto& [t, i] : pts) dev = std::max(dev, std::abs(i - (ia + (ib - ia) * (t - ta) / (tb - ta))));
    return dev;
}

}  // namespace kgl
