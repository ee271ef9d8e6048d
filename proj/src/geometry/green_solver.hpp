#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace kgl {

class SurfaceGrid;

/// Inverts the grid Laplacian on mean-zero fields.
class GreenSolver {
public:
    virtual ~GreenSolver() = default;
    virtual std::vector<double> green_column(std::size_t p) const = 0;
    virtual std::vector<double> solve(std::span<const double> r) const = 0;
};

std::shared_ptr<GreenSolver> make_torus_solver(const SurfaceGrid& grid);
std::shared_ptr<GreenSolver> make_sphere_solver(const SurfaceGrid& grid);

}  // namespace kgl
