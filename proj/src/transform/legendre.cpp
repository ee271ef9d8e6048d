#include "kgl/legendre.hpp"

#include <algorithm>
#include <cmath>

#include "kgl/error.hpp"

namespace kgl {

namespace {

double line_at(double xa, double ya, double xb, double yb, double x) {
    return ya + (yb - ya) / (xb - xa) * (x - xa);
}

// Value at the crossing of the line through samples (a0, a1) and the line through (b0, b1).
std::optional<double> crossing(std::span<const double> x, std::span<const double> y, std::size_t a0,
                               std::size_t a1, std::size_t b0, std::size_t b1) {
    const double sa = (y[a1] - y[a0]) / (x[a1] - x[a0]);
    const double sb = (y[b1] - y[b0]) / (x[b1] - x[b0]);
    if (!(sb > sa)) return std::nullopt;
    // y[a0] + sa (X - x[a0]) = y[b0] + sb (X - x[b0])
    const double X = (y[b0] - y[a0] + sa * x[a0] - sb * x[b0]) / (sa - sb);
    if (!(X >= x[a0] && X <= x[b1])) return std::nullopt;
    return line_at(x[a0], y[a0], x[a1], y[a1], X);
}

bool affine_triple(std::span<const double> x, std::span<const double> y, std::size_t a, double tol) {
    const double s1 = (y[a + 1] - y[a]) / (x[a + 1] - x[a]);
    const double s2 = (y[a + 2] - y[a + 1]) / (x[a + 2] - x[a + 1]);
    return std::abs(s2 - s1) * (x[a + 2] - x[a]) <= tol;
}

}  // namespace

double refine_min(std::span<const double> x, std::span<const double> y, std::size_t k) {
    const std::size_t n = y.size();
    if (k == 0 || k + 1 >= n) return y[k];
    double scale = 1.0;
    for (std::size_t i = (k >= 2 ? k - 2 : 0); i <= std::min(n - 1, k + 2); ++i) scale = std::max(scale, std::abs(y[i]));
    const double tol = 1e-9 * scale;
    const bool left = k >= 2 && affine_triple(x, y, k - 2, tol);
    const bool right = k + 2 < n && affine_triple(x, y, k, tol);
    if (left && right) return y[k];
    if (left || right) {
        std::optional<double> v;
        if (left && k + 2 < n) v = crossing(x, y, k - 1, k, k + 1, k + 2);
        if (right && k >= 2) v = crossing(x, y, k - 2, k - 1, k, k + 1);
        return v ? std::min(*v, y[k]) : y[k];
    }
    const double s01 = (y[k] - y[k - 1]) / (x[k] - x[k - 1]);
    const double s12 = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    const double a = (s12 - s01) / (x[k + 1] - x[k - 1]);
    if (!(a > 0.0)) return y[k];
    double X = std::clamp(0.5 * (x[k - 1] + x[k]) - s01 / (2.0 * a), x[k - 1], x[k + 1]);
    double v = y[k - 1] + s01 * (X - x[k - 1]) + a * (X - x[k - 1]) * (X - x[k]);
    if (k >= 2 && k + 2 < n) {
        // Quartic through five samples, minimized by Newton from the parabolic vertex.
        double c[5];
        const double* xs = x.data() + (k - 2);
        for (int i = 0; i < 5; ++i) c[i] = y[k - 2 + i];
        for (int j = 1; j < 5; ++j)
            for (int i = 4; i >= j; --i) c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - j]);
        auto eval = [&](double z, double& d1, double& d2) {
            double p = c[4], dp = 0.0, ddp = 0.0;
            for (int i = 3; i >= 0; --i) {
                ddp = ddp * (z - xs[i]) + 2.0 * dp;
                dp = dp * (z - xs[i]) + p;
                p = p * (z - xs[i]) + c[i];
            }
            d1 = dp;
            d2 = ddp;
            return p;
        };
        double Z = X, d1 = 0.0, d2 = 0.0;
        bool ok = true;
        for (int it = 0; it < 8; ++it) {
            eval(Z, d1, d2);
            if (!(d2 > 0.0)) {
                ok = false;
                break;
            }
            Z -= d1 / d2;
            if (Z < x[k - 1] || Z > x[k + 1]) {
                ok = false;
                break;
            }
        }
        if (ok) v = eval(Z, d1, d2);
    }
    return std::min(v, y[k]);
}

double refine_max(std::span<const double> x, std::span<const double> y, std::size_t k) {
    std::vector<double> neg(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
    return -refine_min(x, neg, k);
}

namespace {

enum Flag : std::uint8_t { interior = 0, tripped = 1, near_edge = 2 };

// One node's transform. `u` must be finite. Writes out[j] (BOTTOM when tripped)
// and flags[j]. `values` may be null to compute flags only.
void legendre_kernel(std::span<const double> t, std::span<const double> u, const Axis& tau, double* values,
                     std::uint8_t* flags) {
    const std::size_t n = u.size();
    std::size_t k = 0;
    double h[5], xs[5];
    for (std::size_t j = 0; j < tau.size(); ++j) {
        const double s = tau[j];
        auto H = [&](std::size_t i) { return u[i] - t[i] * s; };
        while (k + 1 < n && H(k + 1) < H(k)) ++k;
        while (k > 0 && H(k - 1) < H(k)) --k;
        const bool trip = (k == 0 && n > 1 && !(H(1) <= H(0))) || (k == n - 1 && n > 1 && !(H(n - 2) <= H(n - 1)));
        if (trip) {
            flags[j] = tripped;
            if (values) values[j] = BOTTOM;
            continue;
        }
        flags[j] = (t[k] < t[0] + 1.0 || t[k] > t[n - 1] - 1.0) ? near_edge : interior;
        if (!values) continue;
        const std::size_t lo = k >= 2 ? k - 2 : 0;
        const std::size_t hi = std::min(n - 1, k + 2);
        for (std::size_t i = lo; i <= hi; ++i) {
            h[i - lo] = H(i);
            xs[i - lo] = t[i];
        }
        values[j] = refine_min(std::span<const double>(xs, hi - lo + 1), std::span<const double>(h, hi - lo + 1), k - lo);
    }
}

// One node's inverse transform over a compressed finite profile (taus, v).
void inverse_kernel(std::span<const double> taus, std::span<const double> v, const Axis& t, double* out, std::size_t stride) {
    const std::size_t n = v.size();
    std::size_t k = 0;
    double g[5], xs[5];
    for (std::size_t j = 0; j < t.size(); ++j) {
        const double s = t[j];
        auto G = [&](std::size_t i) { return v[i] + taus[i] * s; };
        while (k + 1 < n && G(k + 1) > G(k)) ++k;
        while (k > 0 && G(k - 1) > G(k)) --k;
        const std::size_t lo = k >= 2 ? k - 2 : 0;
        const std::size_t hi = std::min(n - 1, k + 2);
        // Refinement only across uniformly spaced neighbours; gaps in the finite
        // run would make the interpolant meaningless.
        bool uniform = hi > lo;
        for (std::size_t i = lo; uniform && i < hi; ++i)
            if (std::abs((taus[i + 1] - taus[i]) - (taus[lo + 1] - taus[lo])) > 1e-9) uniform = false;
        double val = G(k);
        if (uniform && n >= 3) {
            for (std::size_t i = lo; i <= hi; ++i) {
                g[i - lo] = G(i);
                xs[i - lo] = taus[i];
            }
            val = refine_max(std::span<const double>(xs, hi - lo + 1), std::span<const double>(g, hi - lo + 1), k - lo);
        }
        out[j * stride] = val;
    }
}

std::vector<double> axis_values(const Axis& a) {
    std::vector<double> v(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) v[k] = a[k];
    return v;
}

}  // namespace

std::vector<double> legendre_profile(const Axis& t, std::span<const double> u, const Axis& tau) {
    if (u.size() != t.size()) throw Error(ErrorKind::invalid_argument, "profile length does not match the time grid");
    std::vector<double> out(tau.size(), BOTTOM);
    if (std::any_of(u.begin(), u.end(), [](double v) { return !std::isfinite(v); })) return out;
    std::vector<std::uint8_t> flags(tau.size());
    const auto tv = axis_values(t);
    legendre_kernel(tv, u, tau, out.data(), flags.data());
    return out;
}

std::vector<double> inverse_legendre_profile(const Axis& tau, std::span<const double> v, const Axis& t) {
    if (v.size() != tau.size()) throw Error(ErrorKind::invalid_argument, "profile length does not match the slope grid");
    std::vector<double> taus, vals;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (std::isfinite(v[k])) {
            taus.push_back(tau[k]);
            vals.push_back(v[k]);
        }
    }
    std::vector<double> out(t.size(), BOTTOM);
    if (vals.empty()) return out;
    inverse_kernel(taus, vals, t, out.data(), 1);
    return out;
}

TestLine legendre(const PotentialCurve& curve, const LegendreOptions& opts) {
    if (curve.slices.size() != curve.t.size() || curve.slices.empty())
        throw Error(ErrorKind::invalid_argument, "curve slices do not match its time grid");
    const auto& grid = curve.grid_ptr();
    const std::size_t n = grid->node_count();
    const std::size_t nt = curve.t.size();
    const std::size_t ntau = opts.tau.size();
    const auto tv = axis_values(curve.t);

    std::vector<std::uint8_t> masked(n, 0), dead(n, 0);
    for (const auto& s : curve.slices) {
        for (std::size_t x = 0; x < n; ++x) {
            if (s.masked(x)) masked[x] = 1;
            if (!std::isfinite(s[x])) dead[x] = 1;
        }
    }
    std::size_t considered = 0;
    for (std::size_t x = 0; x < n; ++x)
        if (!masked[x] && !dead[x]) ++considered;

    // First pass: trip statistics per τ.
    std::vector<std::size_t> trips(ntau, 0);
    std::vector<std::uint8_t> near(ntau, 0);
    std::vector<double> prof(nt);
    std::vector<std::uint8_t> flags(ntau);
    for (std::size_t x = 0; x < n; ++x) {
        if (dead[x]) continue;
        for (std::size_t k = 0; k < nt; ++k) prof[k] = curve.slices[k][x];
        legendre_kernel(tv, prof, opts.tau, nullptr, flags.data());
        if (masked[x]) continue;
        for (std::size_t j = 0; j < ntau; ++j) {
            if (flags[j] == tripped) ++trips[j];
            if (flags[j] == near_edge) near[j] = 1;
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < ntau; ++j) {
        const bool bottom = considered == 0 || static_cast<double>(trips[j]) >= opts.bottom_fraction * considered;
        if (!bottom) keep.push_back(j);
    }

    TestLine line;
    line.tau = opts.tau;
    line.slices.resize(ntau);
    std::vector<std::vector<double>> vals(keep.size(), std::vector<double>(n, BOTTOM));
    std::vector<std::vector<std::uint8_t>> trip_nodes(keep.size(), std::vector<std::uint8_t>(n, 0));
    std::vector<double> out(ntau);
    for (std::size_t x = 0; x < n; ++x) {
        if (dead[x]) {
            for (std::size_t q = 0; q < keep.size(); ++q) trip_nodes[q][x] = 1;
            continue;
        }
        for (std::size_t k = 0; k < nt; ++k) prof[k] = curve.slices[k][x];
        legendre_kernel(tv, prof, opts.tau, out.data(), flags.data());
        for (std::size_t q = 0; q < keep.size(); ++q) {
            vals[q][x] = out[keep[q]];
            if (flags[keep[q]] == tripped) trip_nodes[q][x] = 1;
        }
    }
    for (std::size_t q = 0; q < keep.size(); ++q) {
        PotentialField f(grid, std::move(vals[q]), "dual");
        for (std::size_t x = 0; x < n; ++x)
            if (trip_nodes[q][x]) f.set_masked(x);
        f.dilate_mask(opts.mask_rings);
        for (std::size_t x = 0; x < n; ++x)
            if (masked[x]) f.set_masked(x);
        line.slices[keep[q]] = std::move(f);
        if (near[keep[q]]) line.truncated_taus.push_back(opts.tau[keep[q]]);
    }
    line.update_endpoints();
    return line;
}

PotentialCurve inverse_legendre(const TestLine& line, const Axis& t, CurveKind kind) {
    auto grid = line.grid_ptr();
    if (!grid) throw Error(ErrorKind::empty_domain, "inverse Legendre transform of an all-BOTTOM test line");
    const std::size_t n = grid->node_count();
    const std::size_t nt = t.size();
    std::vector<std::vector<double>> vals(nt, std::vector<double>(n, BOTTOM));
    std::vector<double> taus, prof, out(nt);
    taus.reserve(line.slices.size());
    prof.reserve(line.slices.size());
    for (std::size_t x = 0; x < n; ++x) {
        taus.clear();
        prof.clear();
        for (std::size_t k = 0; k < line.slices.size(); ++k) {
            if (!line.slices[k]) continue;
            const double v = (*line.slices[k])[x];
            if (!std::isfinite(v)) continue;
            taus.push_back(line.tau[k]);
            prof.push_back(v);
        }
        if (prof.empty()) continue;
        inverse_kernel(taus, prof, t, out.data(), 1);
        for (std::size_t j = 0; j < nt; ++j) vals[j][x] = out[j];
    }
    PotentialCurve curve;
    curve.t = t;
    curve.kind = kind;
    curve.slices.reserve(nt);
    double bound = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
        PotentialField f(grid, std::move(vals[j]), "inverse-dual");
        f.mask_bottom();
        const double s = f.sup();
        if (std::isfinite(s)) bound = std::max(bound, s / (1.0 + std::abs(t[j])));
        curve.slices.push_back(std::move(f));
    }
    curve.growth_bound = bound;
    return curve;
}

}  // namespace kgl
