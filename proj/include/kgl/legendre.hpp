#pragma once

#include <span>
#include <utility>
#include <vector>

#include "kgl/curve.hpp"

namespace kgl {

/// Sub-grid value of the minimum of a convex sampled profile around its
/// discrete minimizer k. Kinked, piecewise-affine data get the intersection of
/// the two affine pieces; smooth data get the parabolic vertex.
double refine_min(std::span<const double> x, std::span<const double> y, std::size_t k);
/// Mirror of refine_min for concave profiles.
double refine_max(std::span<const double> x, std::span<const double> y, std::size_t k);

inline constexpr double default_T = 10.0;
inline constexpr double default_dt = 0.05;
inline constexpr double default_dtau = 0.01;

inline Axis default_t_axis() { return Axis::covering(-default_T, default_T, default_dt); }
inline Axis default_tau_axis() { return Axis::covering(-2.0, 3.0, default_dtau); }

struct LegendreOptions {
    Axis tau = default_tau_axis();
    int mask_rings = default_mask_rings;
    double bottom_fraction = 0.99;
};

/// û_τ = min_t (u_t - tτ) per node.
TestLine legendre(const PotentialCurve& curve, const LegendreOptions& opts = {});

/// v̌_t = max_τ (v_τ + tτ) per node.
PotentialCurve inverse_legendre(const TestLine& line, const Axis& t = default_t_axis(),
                                CurveKind kind = CurveKind::subgeodesic_candidate);

/// Scalar versions on a single profile; BOTTOM marks boundary-attained extrema.
std::vector<double> legendre_profile(const Axis& t, std::span<const double> u, const Axis& tau);
std::vector<double> inverse_legendre_profile(const Axis& tau, std::span<const double> v, const Axis& t);

/// (û⁺, û⁻): û⁺_τ = sup_{σ≥τ} û_σ on the line's τ-grid, û⁻_τ = sup_{σ≤−τ} û_σ on the mirrored grid.
std::pair<TestLine, TestLine> restrict_to_rays(const TestLine& line, int mask_rings = default_mask_rings);

/// Per sampled pair (x, y): ŵ_τ = max_σ û_{τ−σ}(x) + v̂_σ(y) on the sum grid.
struct SupConvolution {
    Axis tau;
    std::vector<std::vector<double>> values;  ///< one row per pair; BOTTOM outside the domain
    double tau_minus = 0.0;
    double tau_plus = 0.0;
};
SupConvolution sup_convolution(const TestLine& w1, const TestLine& w2,
                               std::span<const std::pair<std::size_t, std::size_t>> pairs);
/// Max-plus convolution of two τ-profiles on grids with the same step.
std::vector<double> sup_convolve_profiles(std::span<const double> a, std::span<const double> b);

/// Least concave majorant per node on its finite τ-run, with the global endpoint
/// slices closed by one-sided limits.
TestLine concave_usc_regularize(const TestLine& line);
/// Least concave majorant of one profile over its finite run (BOTTOM elsewhere).
std::vector<double> concave_majorant(const Axis& tau, std::span<const double> v);

}  // namespace kgl
