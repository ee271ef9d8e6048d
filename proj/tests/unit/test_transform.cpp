#include <doctest.h>

#include <cmath>
#include <random>

#include "kgl/error.hpp"
#include "kgl/legendre.hpp"
#include "kgl/lines.hpp"

using namespace kgl;

namespace {

struct TorusPair {
    GridPtr g;
    PotentialField u0, u1;
};

TorusPair torus_pair(int N = 32, std::size_t a = 0, std::size_t b = 0) {
    auto g = SurfaceGrid::torus(N);
    if (a == b) {
        a = g->index(N / 4, N / 4);
        b = g->index(3 * N / 4, 3 * N / 4);
    }
    return {g, green_potential(g, dirac_measure(*g, a)), green_potential(g, dirac_measure(*g, b))};
}

bool is_finite(double v) { return std::isfinite(v); }

}  // namespace

TEST_CASE("refinement of sampled extrema") {
    // kink: min of |t - 0.013| on a 0.05 grid is found exactly
    std::vector<double> x{-0.1, -0.05, 0.0, 0.05, 0.1}, y;
    for (double t : x) y.push_back(std::abs(t - 0.013) - 0.4);
    CHECK(refine_min(x, y, 2) == doctest::Approx(-0.4).epsilon(1e-13));
    // smooth: the quartic step recovers the minimum of cosh(t - 0.02) to high order
    y.clear();
    for (double t : x) y.push_back(std::cosh(t - 0.02));
    CHECK(std::abs(refine_min(x, y, 2) - 1.0) <= 1e-9);
    y.clear();
    for (double t : x) y.push_back(-std::cosh(t - 0.02));
    CHECK(std::abs(refine_max(x, y, 2) + 1.0) <= 1e-9);
}

TEST_CASE("scalar Legendre transform of log(1+e^t)") {
    const Axis t = default_t_axis();
    std::vector<double> u;
    for (std::size_t k = 0; k < t.size(); ++k) u.push_back(std::log1p(std::exp(t[k])));
    const Axis tau = Axis::covering(0.0, 1.0, 0.01);
    auto v = legendre_profile(t, u, tau);
    CHECK(std::abs(v[tau.find(0.5)] - std::log(2.0)) <= 1e-6);
    // the closed form -τ log τ - (1-τ) log(1-τ) away from the window-limited ends
    for (double s : {0.1, 0.25, 0.75, 0.9}) {
        const double expect = -s * std::log(s) - (1 - s) * std::log(1 - s);
        CHECK(std::abs(v[tau.find(s)] - expect) <= 1e-6);
    }
    // outside [0, 1] the minimizer runs into the window edge
    auto w = legendre_profile(t, u, Axis::covering(-0.5, 1.5, 0.5));
    CHECK(is_bottom(w[0]));
    CHECK(is_bottom(w[4]));
}

TEST_CASE("constant curve has a single-slope dual") {
    auto [g, u0, u1] = torus_pair(16);
    PotentialCurve c;
    c.t = default_t_axis();
    std::vector<double> v(g->node_count());
    for (std::size_t x = 0; x < v.size(); ++x) v[x] = std::sin(0.3 * static_cast<double>(x));
    for (std::size_t k = 0; k < c.t.size(); ++k) c.slices.emplace_back(g, v);
    auto dual = legendre(c);
    for (std::size_t k = 0; k < dual.tau.size(); ++k) {
        if (std::abs(dual.tau[k]) < 1e-12) {
            REQUIRE(dual.present(k));
            for (std::size_t x = 0; x < v.size(); ++x) CHECK((*dual.slices[k])[x] == doctest::Approx(v[x]).epsilon(1e-14));
        } else {
            CHECK_FALSE(dual.present(k));
        }
    }
    CHECK(dual.tau_minus == 0.0);
    CHECK(dual.tau_plus == 0.0);
}

TEST_CASE("two-Dirac max line: linear dual, rays and round trip") {
    auto [g, u0, u1] = torus_pair(32);
    auto line = build_max_line(u0, u1);
    auto dual = legendre(line);
    const double dt = line.t.step();
    CHECK(dual.tau_minus == doctest::Approx(0.0));
    CHECK(dual.tau_plus == doctest::Approx(1.0));

    SUBCASE("closed-form dual") {
        double err = 0.0;
        for (std::size_t k = 0; k < dual.tau.size(); ++k) {
            const double s = dual.tau[k];
            if (s < -1e-9 || s > 1 + 1e-9) {
                CHECK_FALSE(dual.present(k));
                continue;
            }
            REQUIRE(dual.present(k));
            const auto& f = *dual.slices[k];
            for (std::size_t x = 0; x < f.size(); ++x) {
                if (f.masked(x)) continue;
                err = std::max(err, std::abs(f[x] - ((1 - s) * u0[x] + s * u1[x])));
            }
        }
        CHECK(err <= 2 * dt);
        CHECK(err <= 1e-12);  // piecewise-affine profiles are refined exactly
    }
    SUBCASE("Fenchel inequality") {
        double worst = -INFINITY;
        for (std::size_t k = 0; k < dual.tau.size(); k += 5) {
            if (!dual.present(k)) continue;
            for (std::size_t j = 0; j < line.t.size(); j += 7)
                for (std::size_t x = 0; x < g->node_count(); ++x) {
                    const double v = (*dual.slices[k])[x];
                    if (!is_finite(v)) continue;
                    worst = std::max(worst, v + line.t[j] * dual.tau[k] - line.slices[j][x]);
                }
        }
        CHECK(worst <= 1e-12);
    }
    SUBCASE("restriction to rays") {
        auto [plus, minus] = restrict_to_rays(dual);
        CHECK(plus.tau_plus == doctest::Approx(dual.tau_plus));
        CHECK(minus.tau_plus == doctest::Approx(-dual.tau_minus));
        for (std::size_t k = 0; k < dual.tau.size(); ++k) {
            const double s = dual.tau[k];
            const std::size_t km = minus.tau.find(-s);
            REQUIRE(km != Axis::npos);
            for (std::size_t x = 0; x < g->node_count(); x += 3) {
                const double a = plus.present(k) ? (*plus.slices[k])[x] : BOTTOM;
                const double b = minus.present(km) ? (*minus.slices[km])[x] : BOTTOM;
                const double v = dual.present(k) ? (*dual.slices[k])[x] : BOTTOM;
                CHECK(std::min(a, b) == v);
            }
            if (s <= 0 && plus.present(k)) {
                for (std::size_t x = 0; x < g->node_count(); ++x) {
                    const double expect = std::max(u0[x], u1[x]);
                    CHECK((*plus.slices[k])[x] == doctest::Approx(expect).epsilon(1e-12));
                }
            }
        }
    }
    SUBCASE("inverse transform of the linear dual") {
        auto back = inverse_legendre(dual, line.t);
        const double dtau = dual.tau.step();
        double worst = 0.0, lip = 0.0;
        for (std::size_t j = 0; j < line.t.size(); ++j) {
            const double t = line.t[j];
            for (std::size_t x = 0; x < g->node_count(); ++x) {
                const double a = back.slices[j][x], b = line.slices[j][x];
                if (!is_finite(a) || !is_finite(b)) continue;
                worst = std::max(worst, std::abs(a - b) - 2 * dtau * std::abs(t));
                if (j > 0 && is_finite(back.slices[j - 1][x]))
                    lip = std::max(lip, std::abs(a - back.slices[j - 1][x]) / dt);
            }
        }
        CHECK(worst <= 1e-8);
        CHECK(worst <= 2 * (dt + dtau));
        CHECK(lip <= 1 + 2 * dt);
    }
}

TEST_CASE("shift covariance and order reversal") {
    auto [g, u0, u1] = torus_pair(24);
    const double t0 = 0.35;
    auto base = legendre(build_max_line(u0, u1));
    auto shifted = legendre(build_max_line(u0, u1.shifted(t0)));
    auto above = legendre(build_max_line(u0.shifted(0.1), u1));
    double worst = 0.0, order = -INFINITY;
    for (std::size_t k = 0; k < base.tau.size(); ++k) {
        if (!base.present(k) || !shifted.present(k)) continue;
        for (std::size_t x = 0; x < g->node_count(); ++x) {
            const double a = (*base.slices[k])[x], b = (*shifted.slices[k])[x];
            if (!is_finite(a) || !is_finite(b)) continue;
            worst = std::max(worst, std::abs(b - (a + t0 * base.tau[k])));
            if (above.present(k) && is_finite((*above.slices[k])[x])) order = std::max(order, a - (*above.slices[k])[x]);
        }
    }
    CHECK(worst <= 1e-10);
    CHECK(order <= 1e-12);
}

TEST_CASE("inverse transform of a single-slope line") {
    auto [g, u0, u1] = torus_pair(16);
    TestLine line;
    line.tau = Axis::covering(-1.0, 1.0, 0.25);
    line.slices.resize(line.tau.size());
    const std::size_t k = line.tau.find(0.5);
    line.slices[k] = u1.shifted(-0.2);
    line.update_endpoints();
    auto c = inverse_legendre(line, Axis::covering(-2, 2, 0.5));
    for (std::size_t j = 0; j < c.t.size(); ++j)
        for (std::size_t x = 0; x < g->node_count(); ++x) {
            const double v = (*line.slices[k])[x];
            if (!is_finite(v)) {
                CHECK(is_bottom(c.slices[j][x]));
                continue;
            }
            CHECK(c.slices[j][x] == v + 0.5 * c.t[j]);
        }
    TestLine empty;
    empty.tau = line.tau;
    empty.slices.resize(line.tau.size());
    try {
        inverse_legendre(empty);
        FAIL("expected empty-domain");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::empty_domain);
    }
}

TEST_CASE("round trip of the LSE line") {
    auto [g, u0, u1] = torus_pair(24);
    auto line = build_lse_line(u0, u1);
    auto dual = legendre(line);
    auto back = inverse_legendre(dual, line.t);
    double worst = 0.0;
    for (std::size_t j = 0; j < line.t.size(); ++j) {
        const double t = line.t[j];
        if (std::abs(t) > 2) continue;
        for (std::size_t x = 0; x < g->node_count(); ++x) {
            const double a = back.slices[j][x], b = line.slices[j][x];
            if (!is_finite(a) || !is_finite(b)) continue;
            worst = std::max(worst, std::abs(a - b) / (1 + std::abs(t)));
        }
    }
    // the τ-grid stops at the last sample inside (0, 1), which limits how far
    // into the entropy tails the inverse can reach
    CHECK(worst <= 0.25);
}

TEST_CASE("supremal convolution of profiles") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(13, BOTTOM), b(9, BOTTOM);
        for (int i = 2; i < 11; ++i) a[i] = U(rng) - 0.05 * (i - 6) * (i - 6);
        for (int i = 1; i < 7; ++i) b[i] = U(rng);
        auto fast = sup_convolve_profiles(a, b);
        REQUIRE(fast.size() == a.size() + b.size() - 1);
        for (std::size_t k = 0; k < fast.size(); ++k) {
            double best = BOTTOM;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (k < i || k - i >= b.size()) continue;
                best = std::max(best, a[i] + b[k - i]);
            }
            if (is_bottom(best)) {
                CHECK(is_bottom(fast[k]));
            } else {
                CHECK(std::abs(fast[k] - best) <= 1e-12);
            }
        }
    }
}

TEST_CASE("supremal convolution of two linear test lines") {
    auto X = torus_pair(16);
    auto Y = torus_pair(16, 5, 200);
    const auto& phi0 = X.u0;
    const auto& psi0 = X.u1;
    const auto& phi1 = Y.u0;
    const auto& psi1 = Y.u1;
    auto dx = legendre(build_max_line(phi0, psi0));
    auto dy = legendre(build_max_line(phi1, psi1));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < 64; ++k) pairs.push_back({(k * 37 + 11) % 256, (k * 53 + 3) % 256});
    auto conv = sup_convolution(dx, dy, pairs);
    CHECK(conv.tau_minus == doctest::Approx(dx.tau_minus + dy.tau_minus));
    CHECK(conv.tau_plus == doctest::Approx(dx.tau_plus + dy.tau_plus));
    const double ds = dx.tau.step();
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [x, y] = pairs[p];
        const double cross = std::max(phi0[x] + psi1[y], psi0[x] + phi1[y]);
        for (std::size_t k = 0; k < conv.tau.size(); ++k) {
            const double s = conv.tau[k];
            const double v = conv.values[p][k];
            if (s < -1e-9 || s > 2 + 1e-9 || !is_finite(v) || !is_finite(cross)) continue;
            const double expect = s <= 1 ? (1 - s) * (phi0[x] + phi1[y]) + s * cross
                                         : (s - 1) * (psi0[x] + psi1[y]) + (2 - s) * cross;
            if (!is_finite(expect)) continue;
            worst = std::max(worst, std::abs(v - expect));
            ++compared;
        }
    }
    CHECK(compared > 1000);
    CHECK(worst <= 2 * ds);
}

TEST_CASE("supremal convolution with a single-slope line") {
    auto X = torus_pair(16);
    auto dx = legendre(build_max_line(X.u0, X.u1));
    TestLine single;
    single.tau = dx.tau;
    single.slices.resize(single.tau.size());
    single.slices[single.tau.find(0.0)] = PotentialField::constant(X.g, 0.3);
    single.update_endpoints();
    std::vector<std::pair<std::size_t, std::size_t>> pairs{{3, 4}, {100, 7}, {250, 0}};
    auto conv = sup_convolution(dx, single, pairs);
    CHECK(conv.tau_minus == doctest::Approx(dx.tau_minus));
    CHECK(conv.tau_plus == doctest::Approx(dx.tau_plus));
    for (std::size_t p = 0; p < pairs.size(); ++p)
        for (std::size_t k = 0; k < conv.tau.size(); ++k) {
            const std::size_t j = dx.tau.find(conv.tau[k]);
            const double base = (j != Axis::npos && dx.present(j)) ? (*dx.slices[j])[pairs[p].first] : BOTTOM;
            if (is_bottom(base)) {
                CHECK(is_bottom(conv.values[p][k]));
            } else {
                CHECK(conv.values[p][k] == doctest::Approx(base + 0.3).epsilon(1e-14));
            }
        }
}

TEST_CASE("concave usc regularization") {
    const Axis tau = Axis::covering(0.0, 1.0, 0.5);
    auto lifted = concave_majorant(tau, std::vector<double>{0.0, -1.0, 0.0});
    CHECK(lifted[0] == 0.0);
    CHECK(lifted[1] == 0.0);
    CHECK(lifted[2] == 0.0);

    auto X = torus_pair(16);
    auto dual = legendre(build_lse_line(X.u0, X.u1));
    auto once = concave_usc_regularize(dual);
    auto twice = concave_usc_regularize(once);
    double moved = 0.0, again = 0.0;
    for (std::size_t k = 0; k < dual.tau.size(); ++k) {
        REQUIRE(dual.present(k) == once.present(k));
        if (!dual.present(k)) continue;
        for (std::size_t x = 0; x < X.g->node_count(); ++x) {
            const double a = (*dual.slices[k])[x], b = (*once.slices[k])[x], c = (*twice.slices[k])[x];
            if (!is_finite(a) || !is_finite(b)) continue;
            moved = std::max(moved, std::abs(a - b));
            again = std::max(again, std::abs(b - c));
        }
    }
    CHECK(moved <= 1e-12);  // the LSE dual is already concave
    CHECK(again == 0.0);
    CHECK(check_concave(once).ok);
}
