#include <algorithm>
#include <cmath>

#include "kgl/error.hpp"
#include "kgl/legendre.hpp"

namespace kgl {

namespace {

// Running nodewise suprema over slices visited in `order`; result slot for the
// i-th visited slice is `slot(i)`.
template <class Slot>
std::vector<std::optional<PotentialField>> running_sup(const TestLine& line, const std::vector<std::size_t>& order,
                                                       Slot slot, int mask_rings) {
    auto grid = line.grid_ptr();
    std::vector<std::optional<PotentialField>> out(line.slices.size());
    if (!grid) return out;
    std::vector<double> acc(grid->node_count(), BOTTOM);
    bool started = false;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& s = line.slices[order[i]];
        if (s) {
            started = true;
            for (std::size_t x = 0; x < acc.size(); ++x) acc[x] = std::max(acc[x], (*s)[x]);
        }
        if (!started) continue;
        PotentialField f(grid, acc, "ray");
        f.mask_bottom();
        f.dilate_mask(mask_rings);
        out[slot(i)] = std::move(f);
    }
    return out;
}

}  // namespace

std::pair<TestLine, TestLine> restrict_to_rays(const TestLine& line, int mask_rings) {
    const std::size_t n = line.slices.size();
    std::vector<std::size_t> down(n), up(n);
    for (std::size_t i = 0; i < n; ++i) {
        down[i] = n - 1 - i;
        up[i] = i;
    }
    TestLine plus;
    plus.tau = line.tau;
    plus.slices = running_sup(line, down, [&](std::size_t i) { return n - 1 - i; }, mask_rings);
    plus.update_endpoints();

    // û⁻ lives on the mirrored grid: slot j holds τ' = -τ_{n-1-j}, i.e. the
    // supremum over σ ≤ τ_{n-1-j}; visiting σ upwards fills slots from the top.
    TestLine minus;
    minus.tau = line.tau.mirrored();
    minus.slices = running_sup(line, up, [&](std::size_t i) { return n - 1 - i; }, mask_rings);
    minus.update_endpoints();
    return {std::move(plus), std::move(minus)};
}

namespace {

struct Run {
    std::size_t lo = 0, hi = 0;
    bool ok = false;
};

// Contiguous finite run; ok = false when the finite set is empty or has holes.
Run finite_run(std::span<const double> v) {
    Run r;
    std::size_t lo = v.size(), hi = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::isfinite(v[i])) {
            lo = std::min(lo, i);
            hi = i;
        }
    }
    if (lo == v.size()) return r;
    for (std::size_t i = lo; i <= hi; ++i)
        if (!std::isfinite(v[i])) return r;
    r.lo = lo;
    r.hi = hi;
    r.ok = true;
    return r;
}

bool concave_on(std::span<const double> v, Run r) {
    double scale = 1.0;
    for (std::size_t i = r.lo; i <= r.hi; ++i) scale = std::max(scale, std::abs(v[i]));
    for (std::size_t i = r.lo + 1; i + 1 <= r.hi; ++i)
        if (v[i - 1] - 2.0 * v[i] + v[i + 1] > 1e-12 * scale) return false;
    return true;
}

}  // namespace

std::vector<double> sup_convolve_profiles(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> c(a.size() + b.size() - 1, BOTTOM);
    const Run ra = finite_run(a), rb = finite_run(b);
    if (ra.ok && rb.ok && concave_on(a, ra) && concave_on(b, rb)) {
        // Concave sequences: the max-plus convolution merges increments in
        // decreasing order. Each output is re-evaluated as a[i] + b[j].
        std::size_t i = ra.lo, j = rb.lo;
        c[i + j] = a[i] + b[j];
        while (i < ra.hi || j < rb.hi) {
            if (j == rb.hi || (i < ra.hi && a[i + 1] - a[i] >= b[j + 1] - b[j])) {
                ++i;
            } else {
                ++j;
            }
            c[i + j] = a[i] + b[j];
        }
        return c;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) continue;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (!std::isfinite(b[j])) continue;
            c[i + j] = std::max(c[i + j], a[i] + b[j]);
        }
    }
    return c;
}

SupConvolution sup_convolution(const TestLine& w1, const TestLine& w2,
                               std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    if (w1.tau.per_unit != w2.tau.per_unit)
        throw Error(ErrorKind::invalid_argument, "supremal convolution needs equal slope steps");
    if (w1.empty() || w2.empty()) throw Error(ErrorKind::empty_domain, "supremal convolution of an all-BOTTOM test line");
    SupConvolution out;
    out.tau = Axis{w1.tau.first + w2.tau.first, w1.tau.count + w2.tau.count - 1, w1.tau.per_unit};
    out.tau_minus = w1.tau_minus + w2.tau_minus;
    out.tau_plus = w1.tau_plus + w2.tau_plus;
    std::vector<double> a(w1.slices.size()), b(w2.slices.size());
    for (const auto& [x, y] : pairs) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = w1.slices[i] ? (*w1.slices[i])[x] : BOTTOM;
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = w2.slices[j] ? (*w2.slices[j])[y] : BOTTOM;
        out.values.push_back(sup_convolve_profiles(a, b));
    }
    return out;
}

std::vector<double> concave_majorant(const Axis& tau, std::span<const double> v) {
    std::vector<double> out(v.size(), BOTTOM);
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) continue;
        // Upper hull: drop the last point while it lies on or below the chord.
        while (hull.size() >= 2) {
            const std::size_t p = hull[hull.size() - 2], q = hull.back();
            const double cross = (tau[q] - tau[p]) * (v[i] - v[p]) - (v[q] - v[p]) * (tau[i] - tau[p]);
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(i);
    }
    if (hull.empty()) return out;
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        const std::size_t p = hull[h], q = hull[h + 1];
        for (std::size_t i = p; i <= q; ++i) {
            // Keep exact samples on the hull; interpolate only strictly between.
            out[i] = (i == p) ? v[p] : (i == q ? v[q] : std::max(v[i], v[p] + (v[q] - v[p]) * (tau[i] - tau[p]) / (tau[q] - tau[p])));
        }
    }
    out[hull.front()] = v[hull.front()];
    return out;
}

TestLine concave_usc_regularize(const TestLine& line) {
    TestLine out;
    out.tau = line.tau;
    out.truncated_taus = line.truncated_taus;
    out.slices.resize(line.slices.size());
    auto grid = line.grid_ptr();
    if (!grid) return out;
    const std::size_t n = grid->node_count();
    const std::size_t m = line.slices.size();
    std::size_t kmin = m, kmax = 0;
    for (std::size_t k = 0; k < m; ++k) {
        if (!line.slices[k]) continue;
        kmin = std::min(kmin, k);
        kmax = k;
    }
    std::vector<std::vector<double>> vals(m, std::vector<double>(n, BOTTOM));
    std::vector<double> prof(m);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t k = 0; k < m; ++k) prof[k] = line.slices[k] ? (*line.slices[k])[x] : BOTTOM;
        auto hull = concave_majorant(line.tau, prof);
        // One-sided limits at the global endpoint samples when the node's run
        // stops exactly one step short of them.
        const Run r = finite_run(hull);
        if (r.ok) {
            if (r.lo == kmin + 1) {
                hull[kmin] = (r.hi > r.lo) ? 2.0 * hull[r.lo] - hull[r.lo + 1] : hull[r.lo];
            }
            if (r.hi + 1 == kmax) {
                hull[kmax] = (r.hi > r.lo) ? 2.0 * hull[r.hi] - hull[r.hi - 1] : hull[r.hi];
            }
        }
        for (std::size_t k = 0; k < m; ++k) vals[k][x] = hull[k];
    }
    for (std::size_t k = 0; k < m; ++k) {
        if (!line.slices[k]) continue;
        PotentialField f(grid, std::move(vals[k]), line.slices[k]->label());
        for (std::size_t x : line.slices[k]->masked_nodes()) f.set_masked(x);
        f.mask_bottom();
        f.set_atoms(line.slices[k]->atoms());
        out.slices[k] = std::move(f);
    }
    out.update_endpoints();
    return out;
}

}  // namespace kgl
