#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A commutation: binary vector of length m.
using Delta = std::vector<std::uint8_t>;

std::string delta_to_string(const Delta &d);

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

class UnknownCommutationError : public Error {
public:
    using Error::Error;
};

class DegenerateDomainError : public Error {
public:
    using Error::Error;
};

class SingularSimplexError : public Error {
public:
    using Error::Error;
};

class DegenerateChildError : public Error {
public:
    DegenerateChildError(const std::string &msg, double volume)
        : Error(msg), child_volume(volume) {}
    double child_volume;
};

class OutOfDomainError : public Error {
public:
    using Error::Error;
};

class ModeMismatchError : public Error {
public:
    using Error::Error;
};

class VertexInfeasibleError : public Error {
public:
    using Error::Error;
};

/// Solver stall or loss of accuracy. Callers must treat this as a hard
/// error and never as an infeasibility classification. Carries a JSON dump
/// of the offending subproblem for offline inspection.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string &msg, std::string dump = {})
        : Error(msg), subproblem_dump(std::move(dump)) {}
    std::string subproblem_dump;
};

/// Phase I found a cell whose centroid is infeasible for every admissible
/// commutation: the parameter domain is not covered by the feasible set.
class DomainNotCoveredError : public Error {
public:
    DomainNotCoveredError(const std::string &msg, Vec witness)
        : Error(msg), witness_centroid(std::move(witness)) {}
    Vec witness_centroid;
};

/// Phase II hit the depth or volume safeguard before closing every leaf.
/// Signals that the optimal cost overlap is likely zero or the tolerances
/// are too tight. The stuck cell's diameter is an empirical upper bound on
/// the overlap.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string &msg, std::uint32_t node, int depth,
                        double diameter)
        : Error(msg), node_id(node), depth(depth), cell_diameter(diameter) {}
    std::uint32_t node_id;
    int depth;
    double cell_diameter;
};

/// Phase I hit the depth or volume safeguard.
class DepthExceededError : public Error {
public:
    DepthExceededError(const std::string &msg, std::uint32_t node, int depth)
        : Error(msg), node_id(node), depth(depth) {}
    std::uint32_t node_id;
    int depth;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public IoError {
public:
    using IoError::IoError;
};

class VersionMismatchError : public IoError {
public:
    using IoError::IoError;
};

} // namespace mpt
