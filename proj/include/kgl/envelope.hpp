#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "kgl/curve.hpp"
#include "kgl/potential.hpp"

namespace kgl {

struct EnvelopeSolveConfig {
    double tol_env = 1e-8;
    long max_sweeps = 50000;
    /// Over-relaxation factor in (1, 2); zero picks the optimal factor for the grid.
    double relaxation = 0.0;
    int max_schedule_steps = 20;  ///< C_k = 2^k, k = 0..max_schedule_steps
};

struct SolveReport {
    long sweeps = 0;
    double final_residual = 0.0;  ///< last sup-norm update
    double min_density = 0.0;     ///< min over constrained non-closure nodes of (background + Δu)
    double max_violation = 0.0;   ///< max(u - f)
    double complementarity = 0.0; ///< Σ (f - u) max(0, background + Δu) dA
    double C_used = 0.0;

    nlohmann::json to_json() const;
};

struct RooftopResult {
    PotentialField u;
    SolveReport report;
};

/// Largest u <= f with 1 + Δu >= 0 at unmasked nodes. Nodes where f is BOTTOM
/// carry no upper constraint.
RooftopResult rooftop(const PotentialField& f, const EnvelopeSolveConfig& cfg = {});
RooftopResult rooftop_pair(const PotentialField& u, const PotentialField& v, const EnvelopeSolveConfig& cfg = {});

/// Brute-force Perron iteration (min with obstacle, then one Jacobi lift) until
/// the sup-norm change is below `tol`; intended as an oracle on small grids.
PotentialField perron_rooftop(const PotentialField& f, double tol = 1e-12, long max_iter = 10'000'000);

struct EnvelopeResult {
    PotentialField u;
    SolveReport report;
    double atom_mass = 0.0;  ///< total mass pinned at the singular clusters of χ
};
/// P[χ](ψ): largest ω-psh u <= ψ with u <= χ + C for some C.
EnvelopeResult env_sing_type(const PotentialField& chi, const PotentialField& psi, const EnvelopeSolveConfig& cfg = {});

struct MaximizedCurve {
    TestLine curve;
    double energy_before = 0.0;
    double energy_after = 0.0;
    std::vector<SolveReport> reports;
};
double test_curve_energy(const TestLine& curve);
MaximizedCurve maximize_test_curve(const TestLine& psi, const PotentialField& v, const EnvelopeSolveConfig& cfg = {});

}  // namespace kgl
