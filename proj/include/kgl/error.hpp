#pragma once

#include <stdexcept>
#include <string>

namespace kgl {

enum class ErrorKind {
    invalid_grid,
    invalid_argument,
    unsupported_singularity,
    mass_mismatch,
    resolution,
    unbounded_potential,
    empty_domain,
    hypothesis_violation,
    invalid_shift,
    out_of_scope,
    convergence,
    schedule_exhausted,
    window_too_small,
    io,
    usage,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace kgl
