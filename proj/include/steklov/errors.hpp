#pragma once

#include <stdexcept>
#include <string>

namespace steklov {

/// Invalid argument or precondition violation.
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Boundary tag rule produced an empty S or W region.
struct PartitionError : std::runtime_error {
    explicit PartitionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A deformation inverted an element or degenerated an edge.
struct DeformationError : std::runtime_error {
    explicit DeformationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A form that must be coercive failed its definiteness check.
struct CoercivityError : std::runtime_error {
    explicit CoercivityError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested more eigenpairs than the right-hand side rank supports.
struct RankError : std::runtime_error {
    explicit RankError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The independent analytic oracle failed its own convergence control.
struct OracleError : std::runtime_error {
    explicit OracleError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operation does not apply to the given problem variant.
struct NotApplicableError : std::runtime_error {
    explicit NotApplicableError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Configuration file malformed or inconsistent.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace steklov
