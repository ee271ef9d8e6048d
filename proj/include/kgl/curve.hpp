#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgl/axis.hpp"
#include "kgl/potential.hpp"

namespace kgl {

enum class CurveKind { subgeodesic_candidate, geodesic_candidate, ray };

const char* to_string(CurveKind kind);

/// The two potentials a max or log-sum-exp line was assembled from; hma_residual
/// uses them to locate the switching locus and the singular points.
struct LineGenerators {
    enum class Shape { max, lse } shape = Shape::max;
    PotentialField phi0;
    PotentialField phi1;
};

struct PotentialCurve {
    Axis t;
    std::vector<PotentialField> slices;
    CurveKind kind = CurveKind::subgeodesic_candidate;
    double growth_bound = 0.0;  ///< c in u_t <= c + c|t|
    std::shared_ptr<const LineGenerators> generators;
    std::string label;

    const SurfaceGrid& grid() const { return slices.front().grid(); }
    const GridPtr& grid_ptr() const { return slices.front().grid_ptr(); }
    /// Slice at the grid time equal to `time`; throws if `time` is not a sample.
    const PotentialField& at(double time) const;
};

/// τ-indexed family; a missing slice is the BOTTOM field.
struct TestLine {
    Axis tau;
    std::vector<std::optional<PotentialField>> slices;
    double tau_minus = 0.0;
    double tau_plus = 0.0;
    std::vector<double> truncated_taus;  ///< τ with minimizers within one time unit of the window edge

    bool present(std::size_t k) const { return slices[k].has_value(); }
    const std::optional<PotentialField>& at(double tau_value) const;
    GridPtr grid_ptr() const;
    /// Recomputes τ⁻, τ⁺ as the extreme present samples.
    void update_endpoints();
    bool empty() const;
};

struct Convexity {
    double worst = 0.0;  ///< most negative second difference found (0 if none)
    bool ok = true;
};

/// Discrete convexity in t at unmasked finite nodes.
Convexity check_convex(const PotentialCurve& curve, double tol = 1e-8);
/// Discrete concavity in τ on each node's finite run.
Convexity check_concave(const TestLine& line, double tol = 1e-8);

}  // namespace kgl
