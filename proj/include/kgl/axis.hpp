#pragma once

#include <cmath>
#include <cstddef>

namespace kgl {

/// Uniform 1-D sample grid with values (first + k) / per_unit.
///
/// Steps are restricted to reciprocals of integers so that grids built from
/// the same step share nodes exactly and index arithmetic (sums, mirrors)
/// stays exact.
struct Axis {
    long first = 0;
    std::size_t count = 0;
    long per_unit = 1;

    static Axis covering(double lo, double hi, double step);

    double step() const { return 1.0 / static_cast<double>(per_unit); }
    double operator[](std::size_t k) const {
        return static_cast<double>(first + static_cast<long>(k)) / static_cast<double>(per_unit);
    }
    double front() const { return (*this)[0]; }
    double back() const { return (*this)[count - 1]; }
    std::size_t size() const { return count; }

    /// Index of the sample equal to x (within a hundredth of a step), or npos.
    std::size_t find(double x) const;

    /// Grid of -x for x in this grid, in increasing order.
    Axis mirrored() const { return Axis{-(first + static_cast<long>(count) - 1), count, per_unit}; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

inline Axis Axis::covering(double lo, double hi, double step) {
    long per_unit = std::lround(1.0 / step);
    if (per_unit < 1) per_unit = 1;
    long a = static_cast<long>(std::floor(lo * per_unit + 1e-9));
    long b = static_cast<long>(std::ceil(hi * per_unit - 1e-9));
    return Axis{a, static_cast<std::size_t>(b - a + 1), per_unit};
}

inline std::size_t Axis::find(double x) const {
    double k = x * per_unit - first;
    long r = std::lround(k);
    if (std::abs(k - r) > 1e-2 || r < 0 || r >= static_cast<long>(count)) return npos;
    return static_cast<std::size_t>(r);
}

}  // namespace kgl
