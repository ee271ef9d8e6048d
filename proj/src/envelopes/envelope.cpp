#include "kgl/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "kgl/error.hpp"
#include "kgl/legendre.hpp"

namespace kgl {

nlohmann::json SolveReport::to_json() const {
    return {{"sweeps", sweeps},
            {"final_residual", final_residual},
            {"complementarity", complementarity},
            {"C_used", C_used},
            {"min_density", min_density},
            {"max_violation", max_violation}};
}

namespace {

// constrained: u <= f and b + Δu >= 0; fixed: u = f (masked obstacle);
// free: no upper constraint, so b + Δu = 0 there.
enum class Role : std::uint8_t { constrained, fixed, free };

struct Obstacle {
    GridPtr grid;
    std::vector<double> f;
    std::vector<Role> role;
    double background = 1.0;
};

Obstacle obstacle_of(const PotentialField& f) {
    Obstacle ob{f.grid_ptr(), std::vector<double>(f.values().begin(), f.values().end()),
                std::vector<Role>(f.size(), Role::constrained), 1.0};
    for (std::size_t x = 0; x < f.size(); ++x) {
        const double v = f[x];
        if (std::isnan(v)) throw Error(ErrorKind::invalid_argument, "obstacle has a NaN value");
        if (!std::isfinite(v)) {
            ob.role[x] = Role::free;
        } else if (f.masked(x)) {
            ob.role[x] = Role::fixed;
        }
    }
    return ob;
}

double relaxation_for(const SurfaceGrid& g, const EnvelopeSolveConfig& cfg) {
    if (cfg.relaxation == 0.0) {
        const double L = std::max(g.side(), g.radial_count());
        return 2.0 / (1.0 + std::sin(std::numbers::pi / L));
    }
    if (!(cfg.relaxation > 1.0 && cfg.relaxation < 2.0))
        throw Error(ErrorKind::invalid_argument, "relaxation must lie in (1, 2)");
    return cfg.relaxation;
}

// Greedy multicolouring of the stencil graph; sweeping colour by colour is the
// red-black ordering on the 5-point torus and at least four colours on the 9-point sphere.
std::vector<std::size_t> colour_order(const SurfaceGrid& g) {
    const std::size_t n = g.node_count();
    std::vector<int> colour(n, -1);
    int ncol = 0;
    std::vector<char> used;
    for (std::size_t x = 0; x < n; ++x) {
        used.assign(ncol + 1, 0);
        for (const auto& nb : g.stencil(x))
            if (colour[nb.node] >= 0) used[colour[nb.node]] = 1;
        int c = 0;
        while (used[c]) ++c;
        colour[x] = c;
        ncol = std::max(ncol, c + 1);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t x = 0; x < n; ++x) order[x] = x;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return colour[a] < colour[b]; });
    return order;
}

// Returns the largest density deficit in units of its per-node floor
// 1e-6 + 64 ε (|u| + 1) Σ c_xy; the Σ c_xy factor is the roundoff of Δu in cells
// that are tiny near the sphere caps.
double fill_diagnostics(const Obstacle& ob, std::span<const double> u, SolveReport& rep) {
    const auto& g = *ob.grid;
    rep.min_density = INFINITY;
    rep.max_violation = -INFINITY;
    rep.complementarity = 0.0;
    double worst = 0.0;
    for (std::size_t x = 0; x < u.size(); ++x) {
        if (ob.role[x] == Role::free) continue;
        rep.max_violation = std::max(rep.max_violation, u[x] - ob.f[x]);
        if (ob.role[x] != Role::constrained) continue;
        const double d = ob.background + g.laplacian_at(u, x);
        rep.complementarity += (ob.f[x] - u[x]) * std::max(0.0, d) * g.area(x);
        if (g.is_closure(x)) continue;
        rep.min_density = std::min(rep.min_density, d);
        if (d < 0.0) {
            double D = 0.0;
            for (const auto& nb : g.stencil(x)) D += nb.weight;
            const double floor = 1e-6 + 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(u[x]) + 1.0) * D;
            worst = std::max(worst, -d / floor);
        }
    }
    if (rep.max_violation == -INFINITY) rep.max_violation = 0.0;
    return worst;
}

std::vector<double> initial_guess(const Obstacle& ob) {
    const auto& g = *ob.grid;
    double top = -INFINITY;
    for (std::size_t x = 0; x < ob.f.size(); ++x)
        if (ob.role[x] != Role::free) top = std::max(top, ob.f[x]);
    if (top == -INFINITY) throw Error(ErrorKind::invalid_argument, "obstacle has no finite node");
    std::vector<double> u(ob.f);
    for (std::size_t x = 0; x < u.size(); ++x) {
        if (ob.role[x] != Role::free) continue;
        double s = 0.0;
        int k = 0;
        for (const auto& nb : g.stencil(x)) {
            if (ob.role[nb.node] == Role::free) continue;
            s += ob.f[nb.node];
            ++k;
        }
        u[x] = k > 0 ? s / k : top;
    }
    return u;
}

// Projected SOR. Stops once the sup-norm update is below tol_env, the
// complementarity sum is below 1e-7·V and no density is below its floor. The
// density test matters on the sphere, where tiny cells near the caps amplify an
// update of size δ into a density error of δ/dA.
std::vector<double> solve_obstacle(const Obstacle& ob, const EnvelopeSolveConfig& cfg, SolveReport& rep) {
    if (!(cfg.tol_env > 0.0)) throw Error(ErrorKind::invalid_argument, "tol_env must be positive");
    const auto& g = *ob.grid;
    const double omega = relaxation_for(g, cfg);
    const double comp_target = 1e-7 * g.total_volume();
    const auto order = colour_order(g);
    auto u = initial_guess(ob);
    const double b = ob.background;

    long sweep = 0;
    double last = INFINITY;
    while (sweep < cfg.max_sweeps) {
        ++sweep;
        double maxd = 0.0;
        for (std::size_t x : order) {
            const Role r = ob.role[x];
            if (r == Role::fixed) continue;
            double S = 0.0, D = 0.0;
            for (const auto& nb : g.stencil(x)) {
                S += nb.weight * u[nb.node];
                D += nb.weight;
            }
            double nu = u[x] + omega * ((b + S) / D - u[x]);
            if (r == Role::constrained) nu = std::min(nu, ob.f[x]);
            maxd = std::max(maxd, std::abs(nu - u[x]));
            u[x] = nu;
        }
        last = maxd;
        if (maxd <= cfg.tol_env && (sweep % 8 == 0 || maxd == 0.0)) {
            const double deficit = fill_diagnostics(ob, u, rep);
            if (rep.complementarity <= comp_target && deficit <= 1.0) break;
        }
    }
    rep.sweeps = sweep;
    rep.final_residual = last;
    if (sweep >= cfg.max_sweeps) {
        const double deficit = fill_diagnostics(ob, u, rep);
        if (!(last <= cfg.tol_env && rep.complementarity <= comp_target && deficit <= 1.0))
            throw Error(ErrorKind::convergence, "obstacle solve did not converge in " + std::to_string(sweep) +
                                                    " sweeps (residual " + std::to_string(last) + ", complementarity " +
                                                    std::to_string(rep.complementarity) + ")");
    }
    return u;
}

PotentialField wrap(const PotentialField& like, std::vector<double> values, const std::string& label) {
    PotentialField out(like.grid_ptr(), std::move(values), label);
    for (std::size_t x = 0; x < like.size(); ++x)
        if (like.masked(x)) out.set_masked(x);
    return out;
}

// BOTTOM clusters: BOTTOM nodes linked when within 4 rings, so each cluster's
// 1-ring collar and the collar's neighbours are finite and disjoint from other clusters.
std::vector<std::vector<std::size_t>> bottom_clusters(const PotentialField& chi) {
    const auto& g = chi.grid();
    std::vector<std::size_t> bottoms;
    for (std::size_t x = 0; x < chi.size(); ++x)
        if (is_bottom(chi[x])) bottoms.push_back(x);
    std::vector<std::size_t> parent(bottoms.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    std::vector<long> slot(chi.size(), -1);
    for (std::size_t i = 0; i < bottoms.size(); ++i) slot[bottoms[i]] = static_cast<long>(i);
    for (std::size_t i = 0; i < bottoms.size(); ++i) {
        for (std::size_t y : g.neighbourhood(bottoms[i], 4)) {
            if (slot[y] < 0) continue;
            const std::size_t a = find(i), c = find(static_cast<std::size_t>(slot[y]));
            if (a != c) parent[std::max(a, c)] = std::min(a, c);
        }
    }
    std::vector<std::vector<std::size_t>> out;
    std::vector<long> id(bottoms.size(), -1);
    for (std::size_t i = 0; i < bottoms.size(); ++i) {
        const std::size_t r = find(i);
        if (id[r] < 0) {
            id[r] = static_cast<long>(out.size());
            out.emplace_back();
        }
        out[id[r]].push_back(bottoms[i]);
    }
    return out;
}

// Mass of ω_χ carried by a cluster: flux of χ through the collar boundary, less
// the regular density extrapolated from the next ring.
double cluster_mass(const PotentialField& chi, const std::vector<std::size_t>& cluster) {
    const auto& g = chi.grid();
    std::vector<std::uint8_t> in(chi.size(), 0);
    for (std::size_t k : cluster)
        for (std::size_t y : g.neighbourhood(k, 1)) in[y] = 1;
    double area = 0.0, flux = 0.0;
    for (std::size_t x = 0; x < chi.size(); ++x) {
        if (!in[x]) continue;
        area += g.area(x);
        for (const auto& nb : g.stencil(x)) {
            if (in[nb.node]) continue;
            flux += nb.weight * g.area(x) * (chi[nb.node] - chi[x]);
        }
    }
    double rho = 0.0;
    int count = 0;
    for (std::size_t x = 0; x < chi.size(); ++x) {
        if (in[x]) continue;
        bool touches = false, finite = std::isfinite(chi[x]);
        for (const auto& nb : g.stencil(x)) {
            touches = touches || in[nb.node];
            finite = finite && std::isfinite(chi[nb.node]);
        }
        if (!touches || !finite || g.is_closure(x)) continue;
        rho += 1.0 + g.laplacian_at(chi.values(), x);
        ++count;
    }
    if (count > 0) rho /= count;
    return std::max(0.0, area + flux - rho * area);
}

}  // namespace

RooftopResult rooftop(const PotentialField& f, const EnvelopeSolveConfig& cfg) {
    const Obstacle ob = obstacle_of(f);
    SolveReport rep;
    auto u = solve_obstacle(ob, cfg, rep);
    fill_diagnostics(ob, u, rep);
    return {wrap(f, std::move(u), "rooftop"), rep};
}

RooftopResult rooftop_pair(const PotentialField& u, const PotentialField& v, const EnvelopeSolveConfig& cfg) {
    return rooftop(pointwise_min(u, v), cfg);
}

PotentialField perron_rooftop(const PotentialField& f, double tol, long max_iter) {
    const Obstacle ob = obstacle_of(f);
    const auto& g = f.grid();
    auto u = initial_guess(ob);
    std::vector<double> next(u);
    for (long it = 0; it < max_iter; ++it) {
        double maxd = 0.0;
        for (std::size_t x = 0; x < u.size(); ++x) {
            if (ob.role[x] == Role::fixed) continue;
            double S = 0.0, D = 0.0;
            for (const auto& nb : g.stencil(x)) {
                S += nb.weight * u[nb.node];
                D += nb.weight;
            }
            double lift = (ob.background + S) / D;
            if (ob.role[x] == Role::constrained) lift = std::min(lift, ob.f[x]);
            next[x] = lift;
            maxd = std::max(maxd, std::abs(lift - u[x]));
        }
        u.swap(next);
        if (maxd <= tol) return wrap(f, std::move(u), "perron");
    }
    throw Error(ErrorKind::convergence, "Perron iteration did not reach the tolerance");
}

// P[χ](ψ) through the singular part of χ: each BOTTOM cluster of χ carries a
// point mass m_K. With h the Green potential of
// those atoms, u = h + w where w is the largest (1 - M/V)-subharmonic field
// below ψ - h. This is the C → ∞ limit of rooftop(min(ψ, χ + C)); the discrete
// C-limit itself loses the poles once C exceeds the depth of the grid values.
EnvelopeResult env_sing_type(const PotentialField& chi, const PotentialField& psi, const EnvelopeSolveConfig& cfg) {
    if (chi.grid_ptr() != psi.grid_ptr()) throw Error(ErrorKind::invalid_argument, "fields live on different grids");
    if (psi.any_bottom()) throw Error(ErrorKind::unbounded_potential, "ψ must be bounded");
    const auto& g = chi.grid();
    const double V = g.total_volume();
    const std::size_t n = g.node_count();

    bool any_finite = false;
    for (double v : chi.values()) any_finite = any_finite || std::isfinite(v);
    if (!any_finite) {
        PotentialField out(chi.grid_ptr(), std::vector<double>(n, BOTTOM), "envelope");
        out.mask_bottom();
        return {std::move(out), {}, V};
    }

    const auto clusters = bottom_clusters(chi);
    std::vector<double> r(n, 0.0);
    std::vector<std::uint8_t> atom(n, 0);
    double M = 0.0;
    for (const auto& K : clusters) {
        const double m = cluster_mass(chi, K);
        // the mass sits on the deepest nodes of the cluster: the centre of a
        // masked disc, or every node of a row of isolated atoms
        std::vector<int> depth(K.size());
        for (std::size_t i = 0; i < K.size(); ++i) {
            if (g.is_infinity(K[i])) throw Error(ErrorKind::unsupported_singularity, "singular cluster at the infinity node");
            atom[K[i]] = 1;
            int d = 1;
            for (;; ++d) {
                const auto ring = g.neighbourhood(K[i], d);
                if (std::any_of(ring.begin(), ring.end(), [&](std::size_t y) { return !is_bottom(chi[y]); })) break;
            }
            depth[i] = d;
        }
        const int deepest = *std::max_element(depth.begin(), depth.end());
        const auto count = std::count(depth.begin(), depth.end(), deepest);
        for (std::size_t i = 0; i < K.size(); ++i)
            if (depth[i] == deepest) r[K[i]] += m / static_cast<double>(count) / g.area(K[i]);
        M += m;
    }
    const double b = 1.0 - M / V;
    std::vector<double> h(n, 0.0);
    if (M > 0.0) {
        for (double& v : r) v -= M / V;
        h = g.solve_poisson(r);
    }

    Obstacle ob{chi.grid_ptr(), std::vector<double>(n), std::vector<Role>(n, Role::constrained), std::max(b, 0.0)};
    for (std::size_t x = 0; x < n; ++x) {
        if (atom[x]) {
            ob.f[x] = INFINITY;
            ob.role[x] = Role::free;
        } else {
            ob.f[x] = psi[x] - h[x];
            if (psi.masked(x)) ob.role[x] = Role::fixed;
        }
    }

    SolveReport rep;
    std::vector<double> w;
    if (b <= 1e-6) {
        // No b-subharmonic field but the constants: w = min(ψ - h).
        double lo = INFINITY;
        for (std::size_t x = 0; x < n; ++x)
            if (!atom[x]) lo = std::min(lo, ob.f[x]);
        w.assign(n, lo);
        ob.background = 0.0;
    } else {
        w = solve_obstacle(ob, cfg, rep);
    }
    fill_diagnostics(ob, w, rep);

    std::vector<double> u(n);
    for (std::size_t x = 0; x < n; ++x) u[x] = atom[x] ? BOTTOM : h[x] + w[x];

    double gap = -INFINITY;
    for (std::size_t x = 0; x < n; ++x)
        if (!chi.masked(x) && std::isfinite(chi[x])) gap = std::max(gap, u[x] - chi[x]);
    int k = 0;
    while (k <= cfg.max_schedule_steps && std::ldexp(1.0, k) < gap) ++k;
    if (k > cfg.max_schedule_steps)
        throw Error(ErrorKind::schedule_exhausted,
                    "u - χ reaches " + std::to_string(gap) + ", beyond C = 2^" + std::to_string(cfg.max_schedule_steps));
    rep.C_used = std::ldexp(1.0, k);

    PotentialField out(chi.grid_ptr(), std::move(u), "envelope");
    for (std::size_t x = 0; x < n; ++x)
        if (chi.masked(x) || atom[x]) out.set_masked(x);
    return {std::move(out), rep, M};
}

double test_curve_energy(const TestLine& curve) {
    const double V = curve.grid_ptr()->total_volume();
    double acc = 0.0;
    bool have_prev = false;
    double prev = 0.0;
    for (std::size_t k = 0; k < curve.slices.size(); ++k) {
        if (!curve.present(k)) {
            have_prev = false;
            continue;
        }
        const double val = nonpluripolar_mass(*curve.slices[k]) - V;
        if (have_prev) acc += 0.5 * (prev + val) * curve.tau.step();
        prev = val;
        have_prev = true;
    }
    return acc;
}

MaximizedCurve maximize_test_curve(const TestLine& psi, const PotentialField& v, const EnvelopeSolveConfig& cfg) {
    if (psi.empty()) throw Error(ErrorKind::empty_domain, "test curve has no present slice");
    std::size_t first = 0;
    while (!psi.present(first)) ++first;
    const auto& base = *psi.slices[first];
    for (std::size_t x = 0; x < v.size(); ++x)
        if (std::isfinite(base[x]) && base[x] > v[x] + 1e-9)
            throw Error(ErrorKind::hypothesis_violation, "ψ at the bottom of the τ-range exceeds v");

    MaximizedCurve out;
    out.energy_before = test_curve_energy(psi);
    TestLine raw = psi;
    out.reports.resize(psi.slices.size());

    std::vector<std::size_t> jobs;
    for (std::size_t k = 0; k < psi.slices.size(); ++k)
        if (psi.present(k)) jobs.push_back(k);
    std::vector<std::exception_ptr> errors(jobs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), jobs.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t j = w; j < jobs.size(); j += workers) {
                    try {
                        auto res = env_sing_type(*psi.slices[jobs[j]], v, cfg);
                        raw.slices[jobs[j]] = std::move(res.u);
                        out.reports[jobs[j]] = res.report;
                    } catch (...) {
                        errors[j] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    out.curve = concave_usc_regularize(raw);
    out.curve.tau_minus = psi.tau_minus;
    out.curve.tau_plus = psi.tau_plus;
    out.energy_after = test_curve_energy(out.curve);
    return out;
}

}  // namespace kgl
