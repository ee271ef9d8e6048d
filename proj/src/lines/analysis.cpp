#include <algorithm>
#include <cmath>
#include <limits>

#include "kgl/error.hpp"
#include "kgl/lines.hpp"

namespace kgl {

namespace {

double sup_distance(const PotentialCurve& a, const PotentialCurve& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.t.size(); ++k) {
        const std::size_t j = b.t.find(a.t[k]);
        if (j == Axis::npos) continue;
        const auto& u = a.slices[k];
        const auto& v = b.slices[j];
        for (std::size_t x = 0; x < u.size(); ++x)
            if (std::isfinite(u[x]) && std::isfinite(v[x])) d = std::max(d, std::abs(u[x] - v[x]));
    }
    return d;
}

std::vector<std::size_t> present_in_window(const TestLine& dual) {
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < dual.slices.size(); ++k)
        if (dual.present(k) && dual.tau[k] >= dual.tau_minus - 1e-12 && dual.tau[k] <= dual.tau_plus + 1e-12)
            ks.push_back(k);
    return ks;
}

}  // namespace

ParallelLine parallel_from_g(const PotentialCurve& v_line, const TestLine& dual, const std::function<double(double)>& g,
                             double concavity_tol) {
    if (dual.empty()) throw Error(ErrorKind::empty_domain, "test line has no present slice");
    const auto ks = present_in_window(dual);
    std::vector<double> gv;
    for (std::size_t k : ks) {
        const double v = g(dual.tau[k]);
        if (!std::isfinite(v)) throw Error(ErrorKind::invalid_shift, "g is not finite on [τ⁻, τ⁺]");
        gv.push_back(v);
    }
    for (std::size_t i = 1; i + 1 < gv.size(); ++i) {
        const double d2 = gv[i + 1] - 2.0 * gv[i] + gv[i - 1];
        if (d2 > concavity_tol)
            throw Error(ErrorKind::invalid_shift, "g is not concave near τ = " + std::to_string(dual.tau[ks[i]]) +
                                                      " (second difference " + std::to_string(d2) + ")");
    }

    ParallelLine out;
    out.shifted = dual;
    for (auto& s : out.shifted.slices) s.reset();
    for (std::size_t i = 0; i < ks.size(); ++i) out.shifted.slices[ks[i]] = dual.slices[ks[i]]->shifted(gv[i]);
    out.shifted.update_endpoints();
    out.line = inverse_legendre(out.shifted, v_line.t, CurveKind::geodesic_candidate);
    out.line.label = "parallel line";
    out.sup_distance = sup_distance(out.line, v_line);
    return out;
}

Classification classify_riemann(const PotentialCurve& line, const LegendreOptions& opts) {
    return classify_riemann(line, legendre(line, opts));
}

Classification classify_riemann(const PotentialCurve& line, const TestLine& dual) {
    for (const auto& s : line.slices)
        if (s.any_bottom()) throw Error(ErrorKind::out_of_scope, "classification needs a bounded line");
    if (dual.empty()) throw Error(ErrorKind::empty_domain, "the dual test line is empty");

    Classification c;
    c.tau_minus = dual.tau_minus;
    c.tau_plus = dual.tau_plus;
    const auto ks = present_in_window(dual);
    c.endpoint_minus = *dual.slices[ks.front()];
    c.endpoint_plus = *dual.slices[ks.back()];
    c.tau = Axis{dual.tau.first + static_cast<long>(ks.front()), ks.back() - ks.front() + 1, dual.tau.per_unit};

    // nodes usable in every slice of the window
    const std::size_t n = c.endpoint_minus.size();
    std::vector<std::size_t> nodes;
    for (std::size_t x = 0; x < n; ++x) {
        bool ok = true;
        for (std::size_t k = ks.front(); ok && k <= ks.back(); ++k) {
            if (!dual.present(k)) {
                ok = false;
                break;
            }
            const auto& s = *dual.slices[k];
            ok = !s.masked(x) && std::isfinite(s[x]);
        }
        if (ok) nodes.push_back(x);
    }
    if (nodes.empty()) throw Error(ErrorKind::empty_domain, "no node is finite across the dual window");
    c.fitted_nodes = nodes.size();

    const double width = c.tau_plus - c.tau_minus;
    c.g.assign(c.tau.size(), 0.0);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < c.tau.size(); ++i) {
        const auto& s = *dual.slices[ks.front() + i];
        const double frac = width > 0.0 ? (c.tau[i] - c.tau_minus) / width : 0.0;
        double mean = 0.0;
        for (std::size_t x : nodes) {
            resid[x] = s[x] - ((1.0 - frac) * c.endpoint_minus[x] + frac * c.endpoint_plus[x]);
            mean += resid[x];
        }
        mean /= static_cast<double>(nodes.size());
        c.g[i] = mean;
        for (std::size_t x : nodes) c.linearity_residual = std::max(c.linearity_residual, std::abs(resid[x] - mean));
    }
    return c;
}

FifthPostulate fifth_postulate_check(const PotentialField& u, const PotentialCurve& v_line, const TestLine& dual,
                                     const EnvelopeSolveConfig& cfg, std::size_t tau_stride) {
    if (tau_stride == 0) throw Error(ErrorKind::invalid_argument, "τ stride must be positive");
    if (dual.empty()) throw Error(ErrorKind::empty_domain, "the dual test line is empty");
    const auto& g = u.grid();
    const std::size_t n = u.size();

    std::vector<std::size_t> ks;
    const auto all = present_in_window(dual);
    for (std::size_t i = 0; i < all.size(); i += tau_stride) ks.push_back(all[i]);
    if (ks.back() != all.back()) ks.push_back(all.back());

    TestLine envelopes = dual;
    for (auto& s : envelopes.slices) s.reset();
    std::vector<double> best(n, BOTTOM);
    double compl_max = 0.0;
    for (std::size_t k : ks) {
        auto r = env_sing_type(*dual.slices[k], u, cfg);
        compl_max = std::max(compl_max, r.report.complementarity);
        for (std::size_t x = 0; x < n; ++x) best[x] = std::max(best[x], r.u[x]);
        envelopes.slices[k] = std::move(r.u);
    }
    envelopes.update_endpoints();

    // usc closure: a node no slice reaches takes the largest neighbouring value
    auto closed = best;
    for (std::size_t x = 0; x < n; ++x) {
        if (std::isfinite(best[x])) continue;
        for (const auto& nb : g.stencil(x)) closed[x] = std::max(closed[x], best[nb.node]);
    }

    FifthPostulate out;
    out.tolerance = 10.0 * cfg.tol_env;
    out.max_complementarity = compl_max;
    out.solves = ks.size();
    out.gap.assign(n, std::numeric_limits<double>::quiet_NaN());
    out.min_gap = INFINITY;
    for (std::size_t x = 0; x < n; ++x) {
        if (!std::isfinite(closed[x]) || !std::isfinite(u[x])) continue;
        const double d = closed[x] - u[x];
        out.gap[x] = d;
        out.max_abs_gap = std::max(out.max_abs_gap, std::abs(d));
        if (d < out.min_gap) {
            out.min_gap = d;
            out.argmin_node = x;
        }
    }
    out.holds = out.max_abs_gap <= out.tolerance;
    if (out.holds) {
        out.parallel_line = inverse_legendre(envelopes, v_line.t, CurveKind::geodesic_candidate);
        out.parallel_line->label = "parallel line";
        out.parallel_dual = std::move(envelopes);
    }
    return out;
}

ProductSample product_line(const PotentialCurve& line_x, const TestLine& dual_x, const PotentialCurve& line_y,
                           const TestLine& dual_y, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
    if (line_x.t.first != line_y.t.first || line_x.t.count != line_y.t.count || line_x.t.per_unit != line_y.t.per_unit)
        throw Error(ErrorKind::invalid_argument, "product factors need the same time grid");
    ProductSample out;
    out.pairs = std::move(pairs);
    out.t = line_x.t;
    out.convolution = sup_convolution(dual_x, dual_y, out.pairs);
    out.tau = out.convolution.tau;
    out.tau_minus = INFINITY;
    out.tau_plus = -INFINITY;
    for (const auto& [x, y] : out.pairs) {
        std::vector<double> w(out.t.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = line_x.slices[k][x] + line_y.slices[k][y];
        auto d = legendre_profile(out.t, w, out.tau);
        const auto& conv = out.convolution.values[out.dual.size()];
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!std::isfinite(d[i])) continue;
            out.tau_minus = std::min(out.tau_minus, out.tau[i]);
            out.tau_plus = std::max(out.tau_plus, out.tau[i]);
            if (std::isfinite(conv[i])) out.max_dual_error = std::max(out.max_dual_error, std::abs(d[i] - conv[i]));
        }
        out.w.push_back(std::move(w));
        out.dual.push_back(std::move(d));
    }
    return out;
}

}  // namespace kgl
