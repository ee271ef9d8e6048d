#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgl/verify.hpp"

namespace kgl {

/// A measure on the torus written as "dirac x y" or "cantor depth".
struct MeasureSpec {
    enum class Kind { dirac, cantor } kind = Kind::dirac;
    double x = 0.0, y = 0.0;
    int depth = 0;
};

struct ExperimentConfig {
    std::filesystem::path source;
    std::string name;
    std::string description;
    bool expect_pass = true;  ///< false: every report must fail

    SurfaceKind surface = SurfaceKind::torus;
    int N = 64;
    double V = 1.0;

    /// divisor_pair (sphere), measure_pair (torus), product (torus) or quadratic
    std::string construction;
    std::string line = "max";  ///< divisor_pair: max or lse
    std::vector<DivisorPoint> points;
    MeasureSpec mu0, mu1, mu0_y, mu1_y;
    std::size_t pairs = 64;
    double curvature = 1.0;

    double T = default_T, dt = default_dt;
    double tau_min = -2.0, tau_max = 3.0, dtau = default_dtau;

    std::vector<std::string> checks;
    VerifyOptions verify;
    std::map<std::string, double> tolerances;  ///< check-specific bounds beyond VerifyOptions

    std::string fifth_u = "zero";  ///< zero or v0
    double fifth_shift = 0.0;
    std::size_t fifth_stride = 1;
    double tol_env = 1e-8;

    double g_scale = 1.0;  ///< parallel_from_g uses g(τ) = g_scale τ(1 - τ)
};

/// Parses an INI experiment file; malformed input raises a usage error that
/// names the file, line and field.
ExperimentConfig load_experiment(const std::filesystem::path& file);

/// Names every check the runner understands.
const std::vector<std::string>& known_checks();

struct ExperimentOutcome {
    std::vector<VerificationReport> reports;
    bool expectation_met = false;
    std::filesystem::path dir;
};

/// Builds the configured line, runs its checks and writes reports/, csv/,
/// plots/ and summary.json under `out`.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct ExperimentInfo {
    std::string name;
    std::string description;
    std::filesystem::path path;
};
/// Shipped configs (*.ini) in `dir`, sorted by name.
std::vector<ExperimentInfo> list_experiments(const std::filesystem::path& dir);

/// Renders every CSV under dir/csv into an SVG under dir/plots.
std::vector<std::filesystem::path> plot_artifacts(const std::filesystem::path& dir);

}  // namespace kgl
