#pragma once

#include <stdexcept>
#include <string>

namespace pqlab {

/// An iterative method hit its cap or stagnated.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// A state the algorithms rule out was reached (e.g. an indefinite Newton
/// matrix for a uniformly convex energy).
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

/// The regularized integrand lost convexity; the mollification width must shrink.
class ConvexityError : public std::runtime_error {
 public:
  explicit ConvexityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pqlab
