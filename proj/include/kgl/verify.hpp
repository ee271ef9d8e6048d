#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgl/legendre.hpp"

namespace kgl {

/// Named scalars plus the subset of them that are residuals with a tolerance.
/// pass is true iff every residual is within its tolerance.
struct VerificationReport {
    std::string name;
    std::map<std::string, double> scalars;
    std::map<std::string, double> tolerances;  ///< residual name -> bound
    bool pass = false;
    nlohmann::json provenance = nlohmann::json::object();
    std::vector<std::string> notes;

    void set_residual(const std::string& key, double value, double tol);
    /// Recomputes pass from the residuals (a NaN residual fails).
    void finalize();
    nlohmann::json to_json() const;
};

struct VerifyOptions {
    LegendreOptions legendre;
    double hma_tol = 1e-6;
    int exclusion_rings = 5;
    double hma_t_range = 2.0;
    double speed_p = 1.0;
    double speed_tol = 2e-2;
    double mass_fraction = 0.05;  ///< zero mass and volume identity, as a fraction of V
    double slope_tol = 0.05;
    double slope_T = default_T;
};

/// (πρ(1+Δu))(ü/4) - |½∂_z u̇|² at interior times |t| <= hma_t_range, away
/// from closure cells, singular points and (max lines) the switching locus.
VerificationReport hma_residual(const PotentialCurve& line, const VerifyOptions& opts = {});
/// Per-node |R| at one sample time; NaN where the node is excluded.
std::vector<double> hma_residual_field(const PotentialCurve& line, double t, const VerifyOptions& opts = {});

/// S_p(t) = (Σ |u̇|^p max(0, 1+Δu) dA)^{1/p} at t = -2, 0, 2.
VerificationReport dp_speed_constancy(const PotentialCurve& line, const VerifyOptions& opts = {});

/// Interior slices of a test line carry at most mass_fraction·V; with τ⁻ < τ⁺
/// the endpoint slices are present and carry at most the same. A refined
/// line, when given, must not have a larger worst interior mass.
VerificationReport zero_mass_line_check(const TestLine& tline, const VerifyOptions& opts = {},
                                        const TestLine* refined = nullptr);

/// mass(û⁻_{-τ}) + mass(û⁺_τ) = V on the τ-grid.
VerificationReport volume_identity_check(const TestLine& tline, const VerifyOptions& opts = {});

/// Energy slope of the t >= 0 ray against the dual formula, and the line
/// identity slope(u⁺) = -slope(u⁻).
VerificationReport slope_formula_check(const PotentialCurve& line, const VerifyOptions& opts = {});

/// Max deviation of t -> I(u_t) from its chord over |t| <= range.
double energy_chord_deviation(const PotentialCurve& line, double range = 2.0);

}  // namespace kgl
