#pragma once

#include <filesystem>
#include <span>

#include <json.hpp>

#include "kgl/curve.hpp"

namespace kgl {

/// Rebuilds (or reuses from a small cache) the grid a descriptor names.
GridPtr grid_from_descriptor(const nlohmann::json& d);

/// <stem>.json header {grid, label, mask, atoms, payload} and <stem>.bin with
/// one little-endian float64 per node (BOTTOM stored as -inf).
void write_field(const std::filesystem::path& stem, const PotentialField& u);
PotentialField read_field(const std::filesystem::path& stem);

/// node, x, y, value, masked
void write_field_csv(const std::filesystem::path& file, const PotentialField& u);

/// Directory with manifest.json and slice_<k>.{json,bin}; absent test-line
/// slices have no files.
void write_bundle(const std::filesystem::path& dir, const PotentialCurve& curve);
void write_bundle(const std::filesystem::path& dir, const TestLine& line);
PotentialCurve read_curve_bundle(const std::filesystem::path& dir);
TestLine read_test_line_bundle(const std::filesystem::path& dir);

/// One row per τ, one column per listed node; BOTTOM written as -inf.
void write_profiles_csv(const std::filesystem::path& file, const TestLine& line, std::span<const std::size_t> nodes);

}  // namespace kgl
