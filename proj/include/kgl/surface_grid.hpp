#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace kgl {

enum class SurfaceKind { torus, sphere_chart };

const char* to_string(SurfaceKind kind);

class GreenSolver;

/// Discretized compact Riemann surface.
///
/// Torus: periodic N x N lattice on [0,1)^2, node (i, j) at (i/N, j/N).
///
/// Sphere: the stereographic chart z is covered by a uniform lattice in
/// w = log z with step h = 2π/N: N angular nodes and M radial nodes over
/// s = log|z| in [-L, L], L = π + 2 max(0, log(N/32)) rounded up to whole steps,
/// so every cell is a conformal square and the two cap cells shrink like N⁻².
/// Cap nodes close the surface: the origin node (index NM) and the marked
/// infinity node (index NM + 1). Cell areas are the exact Fubini–Study areas,
/// so Σ dA = 1. Lattice links use the isotropic 9-point weights (2/3 edges,
/// 1/6 diagonals) in w.
///
/// The Laplacian is stored in flux form,
///     (Δu)(x) = Σ_y c_xy (u(y) - u(x)),  c_xy dA(x) = c_yx dA(y),
/// normalized so that 1 + Δu is the density of ω_u against ω.
class SurfaceGrid {
public:
    struct Neighbour {
        std::uint32_t node;
        double weight;
    };

    static std::shared_ptr<const SurfaceGrid> torus(int N, double V = 1.0);
    static std::shared_ptr<const SurfaceGrid> sphere(int N);

    ~SurfaceGrid();

    SurfaceKind kind() const { return kind_; }
    int side() const { return n_; }
    /// Radial node count M (equal to N on the torus).
    int radial_count() const { return m_; }
    std::size_t node_count() const { return area_.size(); }
    std::size_t lattice_count() const { return static_cast<std::size_t>(n_) * m_; }
    double total_volume() const { return volume_; }

    std::span<const double> area_weights() const { return area_; }
    std::span<const double> metric_density() const { return density_; }
    double area(std::size_t x) const { return area_[x]; }

    std::complex<double> coord(std::size_t x) const { return coord_[x]; }
    std::optional<std::size_t> infinity_node() const;
    std::optional<std::size_t> origin_node() const;
    bool is_infinity(std::size_t x) const { return kind_ == SurfaceKind::sphere_chart && x == lattice_count() + 1; }
    bool is_lattice(std::size_t x) const { return x < lattice_count(); }

    /// Chart-closure cells (sphere caps and their first rings). The cap links
    /// are first order, so pointwise diagnostics skip these cells; their area is O(N⁻²).
    bool is_closure(std::size_t x) const {
        return kind_ == SurfaceKind::sphere_chart && (!is_lattice(x) || col(x) == 0 || col(x) == m_ - 1);
    }

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * m_ + i; }
    int col(std::size_t x) const { return static_cast<int>(x % m_); }
    int row(std::size_t x) const { return static_cast<int>(x / m_); }

    std::span<const Neighbour> stencil(std::size_t x) const {
        return {stencil_.data() + offset_[x], offset_[x + 1] - offset_[x]};
    }

    double laplacian_at(std::span<const double> u, std::size_t x) const;
    std::vector<double> laplacian(std::span<const double> u) const;

    /// Squared chart gradient |f_x|² + |f_y|² by central differences; false when
    /// the node has no full central stencil (cap nodes) or a value is not finite.
    bool chart_gradient_sq(std::span<const double> f, std::size_t x, double& out) const;
    /// π ρ(x): the coefficient of the chart form in the homogeneous Monge–Ampère operator.
    double hma_coefficient(std::size_t x) const;

    /// Chebyshev distance in lattice steps (periodic directions wrap; cap nodes
    /// sit one step beyond the first/last radial ring).
    int ring_distance(std::size_t a, std::size_t b) const;
    /// All nodes within `rings` of x, x included.
    std::vector<std::size_t> neighbourhood(std::size_t x, int rings) const;

    /// Node closest to a chart point (torus: point taken modulo 1).
    std::size_t nearest_node(std::complex<double> z) const;

    /// Column G(., p) of the Green kernel: ΔG = δ_p/dA(p) - 1/V, Σ G dA = 0.
    std::vector<double> green_function(std::size_t p) const;

    /// Solution of Δu = r with Σ u dA = 0 (r is projected to mean zero first).
    std::vector<double> solve_poisson(std::span<const double> r) const;

    nlohmann::json descriptor() const;
    std::string cache_key() const;

private:
    SurfaceGrid() = default;
    const GreenSolver& solver() const;
    void add_edge(std::vector<std::vector<Neighbour>>& adj, std::size_t a, std::size_t b, double flux);
    void finalize(std::vector<std::vector<Neighbour>>& adj);

    SurfaceKind kind_ = SurfaceKind::torus;
    int n_ = 0;
    int m_ = 0;
    double volume_ = 0.0;
    double step_ = 0.0;  ///< lattice step in the chart (torus) or in log z (sphere)
    std::vector<std::complex<double>> coord_;
    std::vector<double> area_;
    std::vector<double> density_;
    std::vector<std::size_t> offset_;
    std::vector<Neighbour> stencil_;
    mutable std::shared_ptr<GreenSolver> solver_;
    mutable std::once_flag solver_once_;
};

using GridPtr = std::shared_ptr<const SurfaceGrid>;

}  // namespace kgl
