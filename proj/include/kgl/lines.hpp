#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "kgl/envelope.hpp"
#include "kgl/legendre.hpp"

namespace kgl {

PotentialCurve build_max_line(const PotentialField& phi0, const PotentialField& phi1, const Axis& t = default_t_axis());
PotentialCurve build_lse_line(const PotentialField& phi0, const PotentialField& phi1, const Axis& t = default_t_axis());

struct MeasureLine {
    PotentialCurve line;
    PotentialField u0;
    PotentialField u1;
};
MeasureLine build_measure_line(const GridPtr& grid, const MeasureOnSurface& mu0, const MeasureOnSurface& mu1,
                               const Axis& t = default_t_axis(), int mask_rings = default_mask_rings);

struct ParallelLine {
    TestLine shifted;     ///< w_τ = v̂_τ + g(τ)
    PotentialCurve line;  ///< w̌
    double sup_distance = 0.0;  ///< sup_t sup_x |w̌_t - v_t| over shared finite nodes
};
/// `dual` must be legendre(v_line); g is sampled on its slope grid within [τ⁻, τ⁺].
ParallelLine parallel_from_g(const PotentialCurve& v_line, const TestLine& dual, const std::function<double(double)>& g,
                             double concavity_tol = 1e-10);

struct Classification {
    double tau_minus = 0.0;
    double tau_plus = 0.0;
    PotentialField endpoint_minus;
    PotentialField endpoint_plus;
    Axis tau;                ///< samples in [τ⁻, τ⁺]
    std::vector<double> g;   ///< fitted concave function on `tau`
    double linearity_residual = 0.0;
    std::size_t fitted_nodes = 0;
};
/// Fits v̂_τ ≈ (1-s) v̂_{τ⁻} + s v̂_{τ⁺} + g(τ), s = (τ-τ⁻)/(τ⁺-τ⁻).
Classification classify_riemann(const PotentialCurve& line, const TestLine& dual);
Classification classify_riemann(const PotentialCurve& line, const LegendreOptions& opts = {});

struct FifthPostulate {
    bool holds = false;
    std::vector<double> gap;  ///< sup_τ P[v̂_τ](u) - u per node
    double max_abs_gap = 0.0;
    double min_gap = 0.0;
    std::size_t argmin_node = 0;
    double tolerance = 0.0;
    double max_complementarity = 0.0;  ///< worst over the envelope solves
    std::size_t solves = 0;
    std::optional<TestLine> parallel_dual;
    std::optional<PotentialCurve> parallel_line;
};
/// Evaluates P[v̂_τ](u) for every present τ of `dual` with index stride `tau_stride`.
FifthPostulate fifth_postulate_check(const PotentialField& u, const PotentialCurve& v_line, const TestLine& dual,
                                     const EnvelopeSolveConfig& cfg = {}, std::size_t tau_stride = 1);

struct ProductSample {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    Axis t;
    std::vector<std::vector<double>> w;     ///< w_t(x, y) per pair
    Axis tau;
    std::vector<std::vector<double>> dual;  ///< Legendre in t of w per pair
    SupConvolution convolution;             ///< supremal convolution of the factor duals
    double max_dual_error = 0.0;            ///< over τ where both are finite
    double tau_minus = 0.0;                 ///< endpoints of the pointwise duals (extreme finite samples)
    double tau_plus = 0.0;
};
ProductSample product_line(const PotentialCurve& line_x, const TestLine& dual_x, const PotentialCurve& line_y,
                           const TestLine& dual_y, std::vector<std::pair<std::size_t, std::size_t>> pairs);

}  // namespace kgl
