#include "kgl/potential.hpp"

#include <algorithm>
#include <map>

#include "kgl/error.hpp"

namespace kgl {

PotentialField::PotentialField(GridPtr grid, std::vector<double> values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
    if (!grid_) throw Error(ErrorKind::invalid_argument, "potential field without grid");
    if (values_.size() != grid_->node_count())
        throw Error(ErrorKind::invalid_argument, "field size does not match grid node count");
}

PotentialField PotentialField::constant(GridPtr grid, double c, std::string label) {
    std::vector<double> v(grid->node_count(), c);
    return PotentialField(std::move(grid), std::move(v), std::move(label));
}

bool PotentialField::has_mask() const {
    return std::any_of(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; });
}

std::size_t PotentialField::mask_count() const {
    return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; }));
}

void PotentialField::set_masked(std::size_t x, bool on) {
    if (mask_.empty()) {
        if (!on) return;
        mask_.assign(values_.size(), 0);
    }
    mask_[x] = on ? 1 : 0;
}

void PotentialField::clear_mask() { mask_.clear(); }

void PotentialField::mask_bottom() {
    for (std::size_t x = 0; x < values_.size(); ++x)
        if (is_bottom(values_[x])) set_masked(x);
}

void PotentialField::dilate_mask(int rings) {
    if (rings <= 0 || mask_.empty()) return;
    std::vector<std::uint8_t> out(mask_);
    for (std::size_t x = 0; x < mask_.size(); ++x) {
        if (!mask_[x]) continue;
        for (std::size_t y : grid_->neighbourhood(x, rings)) out[y] = 1;
    }
    mask_ = std::move(out);
}

std::vector<std::size_t> PotentialField::masked_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < mask_.size(); ++x)
        if (mask_[x]) out.push_back(x);
    return out;
}

void PotentialField::add_atom(std::size_t node, double weight) {
    for (auto& a : atoms_) {
        if (a.node == node) {
            a.weight += weight;
            return;
        }
    }
    atoms_.push_back({node, weight});
}

bool PotentialField::any_bottom() const {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return is_bottom(v); });
}

bool PotentialField::stencil_clean(std::size_t x) const {
    if (masked(x) || !std::isfinite(values_[x])) return false;
    for (const auto& nb : grid_->stencil(x)) {
        if (masked(nb.node) || !std::isfinite(values_[nb.node])) return false;
    }
    return true;
}

double PotentialField::sup() const {
    double s = BOTTOM;
    for (double v : values_)
        if (std::isfinite(v)) s = std::max(s, v);
    return s;
}

PotentialField PotentialField::shifted(double c) const {
    PotentialField out(*this);
    for (double& v : out.values_) v += c;
    return out;
}

namespace {

void check_same_grid(const PotentialField& a, const PotentialField& b) {
    if (a.grid_ptr() != b.grid_ptr()) throw Error(ErrorKind::invalid_argument, "fields live on different grids");
}

}  // namespace

PotentialField pointwise_max(const PotentialField& a, const PotentialField& b) {
    check_same_grid(a, b);
    std::vector<double> v(a.size());
    for (std::size_t x = 0; x < v.size(); ++x) v[x] = std::max(a[x], b[x]);
    PotentialField out(a.grid_ptr(), std::move(v));
    for (std::size_t x = 0; x < out.size(); ++x)
        if (is_bottom(out[x])) out.set_masked(x);
    return out;
}

PotentialField pointwise_min(const PotentialField& a, const PotentialField& b) {
    check_same_grid(a, b);
    std::vector<double> v(a.size());
    for (std::size_t x = 0; x < v.size(); ++x) v[x] = std::min(a[x], b[x]);
    PotentialField out(a.grid_ptr(), std::move(v));
    for (std::size_t x = 0; x < out.size(); ++x)
        if (a.masked(x) || b.masked(x) || is_bottom(out[x])) out.set_masked(x);
    return out;
}

double MeasureOnSurface::computed_total(const SurfaceGrid& grid) const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    if (!density.empty()) {
        for (std::size_t x = 0; x < density.size(); ++x) s += density[x] * grid.area(x);
    }
    return s;
}

PotentialField divisor_potential(const GridPtr& grid, std::vector<DivisorPoint> points, int mask_rings) {
    if (grid->kind() != SurfaceKind::sphere_chart)
        throw Error(ErrorKind::invalid_argument, "divisor potentials live on the sphere grid");
    if (points.empty()) throw Error(ErrorKind::invalid_argument, "divisor needs at least one point");
    std::vector<DivisorPoint> merged;
    for (const auto& p : points) {
        if (!std::isfinite(p.z.real()) || !std::isfinite(p.z.imag()))
            throw Error(ErrorKind::unsupported_singularity, "divisor point at infinity");
        if (std::abs(p.z) > 2.0)
            throw Error(ErrorKind::unsupported_singularity, "divisor point outside the chart disc |z| <= 2");
        if (p.multiplicity < 1) throw Error(ErrorKind::invalid_argument, "multiplicity must be positive");
        auto it = std::find_if(merged.begin(), merged.end(), [&](const DivisorPoint& q) { return q.z == p.z; });
        if (it != merged.end()) {
            it->multiplicity += p.multiplicity;
        } else {
            merged.push_back(p);
        }
    }
    double degree = 0.0;
    for (const auto& p : merged) degree += p.multiplicity;

    const auto& g = *grid;
    std::vector<double> v(g.node_count(), 0.0);
    for (std::size_t x = 0; x < g.node_count(); ++x) {
        if (g.is_infinity(x)) continue;
        const auto z = g.coord(x);
        const double nz = 1.0 + std::norm(z);
        double acc = 0.0;
        for (const auto& p : merged)
            acc += p.multiplicity / degree * std::log(std::norm(z - p.z) / (nz * (1.0 + std::norm(p.z))));
        v[x] = acc;
    }
    double at_inf = 0.0;
    for (const auto& p : merged) at_inf -= p.multiplicity / degree * std::log(1.0 + std::norm(p.z));
    v[*g.infinity_node()] = at_inf;

    PotentialField out(grid, std::move(v), "divisor");
    for (const auto& p : merged) {
        const std::size_t node = g.nearest_node(p.z);
        out.set_masked(node);
        out.add_atom(node, p.multiplicity / degree * g.total_volume());
    }
    out.dilate_mask(mask_rings);
    for (std::size_t x : out.masked_nodes()) out.mutable_values()[x] = BOTTOM;
    return out;
}

PotentialField green_potential(const GridPtr& grid, const MeasureOnSurface& mu, int mask_rings) {
    const auto& g = *grid;
    const double V = g.total_volume();
    const double total = mu.computed_total(g);
    if (std::abs(total - V) > 1e-9 * V || std::abs(mu.total - V) > 1e-9 * V)
        throw Error(ErrorKind::mass_mismatch,
                    "measure mass " + std::to_string(total) + " differs from volume " + std::to_string(V));
    std::vector<double> r(g.node_count(), -1.0);
    if (!mu.density.empty()) {
        for (std::size_t x = 0; x < r.size(); ++x) r[x] += mu.density[x];
    }
    for (const auto& a : mu.atoms) {
        if (g.is_infinity(a.node)) throw Error(ErrorKind::unsupported_singularity, "atom at the infinity node");
        r[a.node] += a.weight / g.area(a.node);
    }
    auto u = g.solve_poisson(r);
    PotentialField out(grid, std::move(u), "green");
    for (const auto& a : mu.atoms) {
        if (a.weight <= 0.0) continue;
        out.set_masked(a.node);
        out.add_atom(a.node, a.weight);
    }
    for (const auto& a : out.atoms()) out.mutable_values()[a.node] = BOTTOM;
    out.dilate_mask(mask_rings);
    const double s = out.sup();
    for (double& x : out.mutable_values()) x -= s;
    return out;
}

MeasureOnSurface dirac_measure(const SurfaceGrid& grid, std::size_t node) {
    return MeasureOnSurface{{{node, grid.total_volume()}}, {}, grid.total_volume()};
}

MeasureOnSurface cantor_measure(const SurfaceGrid& grid, int depth) {
    if (grid.kind() != SurfaceKind::torus) throw Error(ErrorKind::invalid_argument, "Cantor measures live on the torus");
    if (depth < 1) throw Error(ErrorKind::invalid_argument, "Cantor depth must be at least 1");
    if (depth >= 31 || (1L << depth) > grid.side())
        throw Error(ErrorKind::resolution, "2^depth exceeds the grid side count");
    std::vector<std::pair<double, double>> intervals{{0.0, 1.0}};
    for (int d = 0; d < depth; ++d) {
        std::vector<std::pair<double, double>> next;
        next.reserve(intervals.size() * 2);
        for (auto [a, b] : intervals) {
            const double len = (b - a) / 3.0;
            next.emplace_back(a, a + len);
            next.emplace_back(b - len, b);
        }
        intervals = std::move(next);
    }
    const double w = grid.total_volume() / static_cast<double>(intervals.size());
    std::map<std::size_t, double> snapped;
    for (auto [a, b] : intervals) snapped[grid.nearest_node({0.5 * (a + b), 0.5})] += w;
    MeasureOnSurface mu;
    for (auto [node, weight] : snapped) mu.atoms.push_back({node, weight});
    mu.total = grid.total_volume();
    return mu;
}

MassReport nonpluripolar_mass_report(const PotentialField& u) {
    const auto& g = u.grid();
    MassReport rep;
    for (std::size_t x = 0; x < g.node_count(); ++x) {
        if (!u.stencil_clean(x)) {
            ++rep.skipped_nodes;
            continue;
        }
        const double d = (1.0 + g.laplacian_at(u.values(), x)) * g.area(x);
        if (d > 0.0) {
            rep.mass += d;
        } else {
            rep.clipped_negative += d;
        }
    }
    return rep;
}

double ma_energy(const PotentialField& u) {
    const auto& g = u.grid();
    if (u.any_bottom()) throw Error(ErrorKind::unbounded_potential, "energy of a field with BOTTOM values");
    double acc = 0.0;
    for (std::size_t x = 0; x < g.node_count(); ++x)
        acc += u[x] * (2.0 + g.laplacian_at(u.values(), x)) * g.area(x);
    return acc / (2.0 * g.total_volume());
}

double min_psh_density(const PotentialField& u) {
    const auto& g = u.grid();
    double m = INFINITY;
    for (std::size_t x = 0; x < g.node_count(); ++x) {
        if (!u.stencil_clean(x) || g.is_closure(x)) continue;
        m = std::min(m, 1.0 + g.laplacian_at(u.values(), x));
    }
    return m;
}

}  // namespace kgl
