#include <algorithm>
#include <cmath>
#include <set>

#include "kgl/error.hpp"
#include "kgl/lines.hpp"

namespace kgl {

namespace {

void check_pair(const PotentialField& phi0, const PotentialField& phi1) {
    if (phi0.grid_ptr() != phi1.grid_ptr())
        throw Error(ErrorKind::invalid_argument, "line generators live on different grids");
    for (std::size_t x = 0; x < phi0.size(); ++x) {
        if (is_bottom(phi0[x]) && is_bottom(phi1[x]))
            throw Error(ErrorKind::hypothesis_violation,
                        "singular sets of the two potentials intersect at node " + std::to_string(x));
    }
}

template <class Combine>
PotentialCurve assemble(const PotentialField& phi0, const PotentialField& phi1, const Axis& t, LineGenerators::Shape shape,
                        Combine combine) {
    check_pair(phi0, phi1);
    PotentialCurve c;
    c.t = t;
    c.kind = CurveKind::geodesic_candidate;
    c.slices.reserve(t.size());
    const std::size_t n = phi0.size();
    double bound = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        std::vector<double> v(n);
        for (std::size_t x = 0; x < n; ++x) v[x] = combine(phi0[x], phi1[x] + t[k]);
        PotentialField f(phi0.grid_ptr(), std::move(v), shape == LineGenerators::Shape::max ? "max-line" : "lse-line");
        bound = std::max(bound, f.sup() / (1.0 + std::abs(t[k])));
        c.slices.push_back(std::move(f));
    }
    c.growth_bound = bound;
    c.generators = std::make_shared<LineGenerators>(LineGenerators{shape, phi0, phi1});
    return c;
}

}  // namespace

PotentialCurve build_max_line(const PotentialField& phi0, const PotentialField& phi1, const Axis& t) {
    auto c = assemble(phi0, phi1, t, LineGenerators::Shape::max, [](double a, double b) { return std::max(a, b); });
    c.label = "max line";
    return c;
}

PotentialCurve build_lse_line(const PotentialField& phi0, const PotentialField& phi1, const Axis& t) {
    auto c = assemble(phi0, phi1, t, LineGenerators::Shape::lse, [](double a, double b) {
        const double m = std::max(a, b);
        if (is_bottom(m)) return BOTTOM;
        return m + std::log1p(std::exp(std::min(a, b) - m));
    });
    c.label = "log-sum-exp line";
    return c;
}

MeasureLine build_measure_line(const GridPtr& grid, const MeasureOnSurface& mu0, const MeasureOnSurface& mu1,
                               const Axis& t, int mask_rings) {
    std::set<std::size_t> s0;
    for (const auto& a : mu0.atoms)
        if (a.weight > 0.0) s0.insert(a.node);
    for (const auto& a : mu1.atoms)
        if (a.weight > 0.0 && s0.count(a.node))
            throw Error(ErrorKind::hypothesis_violation, "measure supports overlap at node " + std::to_string(a.node));
    auto u0 = green_potential(grid, mu0, mask_rings);
    auto u1 = green_potential(grid, mu1, mask_rings);
    auto line = build_max_line(u0, u1, t);
    line.label = "measure line";
    return MeasureLine{std::move(line), std::move(u0), std::move(u1)};
}

}  // namespace kgl
