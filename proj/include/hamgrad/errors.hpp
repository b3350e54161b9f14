#pragma once

#include <stdexcept>
#include <string>

namespace hamgrad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid geometry description or an operator applied to an incompatible geometry.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// A field was combined with a manifold (or another field) it is not bound to.
class FieldMismatch : public Error {
public:
    using Error::Error;
};

/// An operation's documented precondition does not hold for its inputs.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The time integrator could not continue. Carries the failing node and time
/// together with the last snapshot time that was accepted.
class SolverAbort : public Error {
public:
    SolverAbort(const std::string& what, int node, double t, double last_good_t)
        : Error(what), node_(node), t_(t), last_good_t_(last_good_t) {}

    [[nodiscard]] int node() const noexcept { return node_; }
    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] double last_good_time() const noexcept { return last_good_t_; }

private:
    int node_;
    double t_;
    double last_good_t_;
};

/// An iterative linear or eigen solve missed its residual target.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

} // namespace hamgrad
