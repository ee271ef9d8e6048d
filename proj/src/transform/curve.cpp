#include "kgl/curve.hpp"

#include <algorithm>

#include "kgl/error.hpp"

namespace kgl {

const char* to_string(CurveKind kind) {
    switch (kind) {
        case CurveKind::subgeodesic_candidate: return "subgeodesic-candidate";
        case CurveKind::geodesic_candidate: return "geodesic-candidate";
        case CurveKind::ray: return "ray";
    }
    return "curve";
}

const PotentialField& PotentialCurve::at(double time) const {
    const std::size_t k = t.find(time);
    if (k == Axis::npos) throw Error(ErrorKind::invalid_argument, "time " + std::to_string(time) + " is not a grid sample");
    return slices[k];
}

const std::optional<PotentialField>& TestLine::at(double tau_value) const {
    const std::size_t k = tau.find(tau_value);
    if (k == Axis::npos) throw Error(ErrorKind::invalid_argument, "slope " + std::to_string(tau_value) + " is not a grid sample");
    return slices[k];
}

GridPtr TestLine::grid_ptr() const {
    for (const auto& s : slices)
        if (s) return s->grid_ptr();
    return nullptr;
}

void TestLine::update_endpoints() {
    std::size_t lo = Axis::npos, hi = Axis::npos;
    for (std::size_t k = 0; k < slices.size(); ++k) {
        if (!slices[k]) continue;
        if (lo == Axis::npos) lo = k;
        hi = k;
    }
    if (lo == Axis::npos) {
        tau_minus = tau_plus = 0.0;
        return;
    }
    tau_minus = tau[lo];
    tau_plus = tau[hi];
}

bool TestLine::empty() const {
    return std::none_of(slices.begin(), slices.end(), [](const auto& s) { return s.has_value(); });
}

Convexity check_convex(const PotentialCurve& curve, double tol) {
    Convexity c;
    const std::size_t n = curve.slices.front().size();
    for (std::size_t k = 1; k + 1 < curve.slices.size(); ++k) {
        const auto& a = curve.slices[k - 1];
        const auto& b = curve.slices[k];
        const auto& d = curve.slices[k + 1];
        for (std::size_t x = 0; x < n; ++x) {
            if (a.masked(x) || b.masked(x) || d.masked(x)) continue;
            if (!std::isfinite(a[x]) || !std::isfinite(b[x]) || !std::isfinite(d[x])) continue;
            const double dd = a[x] - 2.0 * b[x] + d[x];
            c.worst = std::min(c.worst, dd);
        }
    }
    c.ok = c.worst >= -tol;
    return c;
}

Convexity check_concave(const TestLine& line, double tol) {
    Convexity c;
    auto grid = line.grid_ptr();
    if (!grid) return c;
    const std::size_t n = grid->node_count();
    for (std::size_t k = 1; k + 1 < line.slices.size(); ++k) {
        if (!line.present(k - 1) || !line.present(k) || !line.present(k + 1)) continue;
        const auto& a = *line.slices[k - 1];
        const auto& b = *line.slices[k];
        const auto& d = *line.slices[k + 1];
        for (std::size_t x = 0; x < n; ++x) {
            if (a.masked(x) || b.masked(x) || d.masked(x)) continue;
            if (!std::isfinite(a[x]) || !std::isfinite(b[x]) || !std::isfinite(d[x])) continue;
            const double dd = -(a[x] - 2.0 * b[x] + d[x]);
            c.worst = std::min(c.worst, dd);
        }
    }
    c.ok = c.worst >= -tol;
    return c;
}

}  // namespace kgl
