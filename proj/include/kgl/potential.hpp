#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kgl/surface_grid.hpp"

namespace kgl {

/// The −∞ sentinel. IEEE arithmetic already gives BOTTOM + c = BOTTOM and
/// max(BOTTOM, a) = a.
inline constexpr double BOTTOM = -std::numeric_limits<double>::infinity();

inline bool is_bottom(double v) { return v == BOTTOM; }

struct Atom {
    std::size_t node;
    double weight;
};

/// Extended-real node field with a singular mask.
///
/// Masked nodes may hold BOTTOM or finite values; mass quadrature ignores any
/// node whose stencil touches the mask. Atoms record the point masses that
/// the field is known to carry at individual nodes.
class PotentialField {
public:
    PotentialField() = default;
    PotentialField(GridPtr grid, std::vector<double> values, std::string label = {});

    static PotentialField constant(GridPtr grid, double c, std::string label = {});

    const SurfaceGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    std::span<const double> values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    double operator[](std::size_t x) const { return values_[x]; }

    bool masked(std::size_t x) const { return !mask_.empty() && mask_[x] != 0; }
    bool has_mask() const;
    std::size_t mask_count() const;
    void set_masked(std::size_t x, bool on = true);
    void clear_mask();
    /// Masks every BOTTOM node (and the infinity node's neighbourhood is untouched).
    void mask_bottom();
    /// Extends the mask by `rings` Chebyshev rings.
    void dilate_mask(int rings);
    std::vector<std::size_t> masked_nodes() const;

    const std::vector<Atom>& atoms() const { return atoms_; }
    void set_atoms(std::vector<Atom> atoms) { atoms_ = std::move(atoms); }
    void add_atom(std::size_t node, double weight);

    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    bool any_bottom() const;
    /// Node is usable for stencil quantities: it, and every stencil neighbour,
    /// is unmasked with a finite value.
    bool stencil_clean(std::size_t x) const;

    /// Supremum over finite values.
    double sup() const;
    PotentialField shifted(double c) const;

private:
    GridPtr grid_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
    std::vector<Atom> atoms_;
    std::string label_;
};

PotentialField pointwise_max(const PotentialField& a, const PotentialField& b);
PotentialField pointwise_min(const PotentialField& a, const PotentialField& b);

struct MeasureOnSurface {
    std::vector<Atom> atoms;
    std::vector<double> density;  ///< optional, against ω; empty means none
    double total = 0.0;

    /// Σ atom weights + Σ density dA.
    double computed_total(const SurfaceGrid& grid) const;
};

struct DivisorPoint {
    std::complex<double> z;
    int multiplicity = 1;
};

inline constexpr int default_mask_rings = 3;

PotentialField divisor_potential(const GridPtr& grid, std::vector<DivisorPoint> points,
                                 int mask_rings = default_mask_rings);

PotentialField green_potential(const GridPtr& grid, const MeasureOnSurface& mu,
                               int mask_rings = default_mask_rings);

MeasureOnSurface dirac_measure(const SurfaceGrid& grid, std::size_t node);
MeasureOnSurface cantor_measure(const SurfaceGrid& grid, int depth);

struct MassReport {
    double mass = 0.0;
    double clipped_negative = 0.0;  ///< Σ min(0, 1+Δu) dA over quadrature nodes
    std::size_t skipped_nodes = 0;
};

MassReport nonpluripolar_mass_report(const PotentialField& u);
inline double nonpluripolar_mass(const PotentialField& u) { return nonpluripolar_mass_report(u).mass; }

double ma_energy(const PotentialField& u);

/// min over unmasked stencil-clean non-closure nodes of 1 + Δu (+∞ when there are none).
double min_psh_density(const PotentialField& u);

}  // namespace kgl
