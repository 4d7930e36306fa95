#pragma once

#include <stdexcept>
#include <string>

namespace singular_drift {

/// Base class of every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The regularized product did not stabilize before the grid resolution limit.
class NonConvergent : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// A drift failed the (beta, q) admissibility window or its norms are not finite.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

/// Picard iteration hit the iteration cap before the stopping rule was met.
class MaxIterExceeded : public Error {
 public:
  using Error::Error;
};

class CalibrationFailed : public Error {
 public:
  using Error::Error;
};

/// The fixed-point inverse of x -> x + u(t, x) did not converge.
class InverseDiverged : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// A study stage failed; the original error is nested.
class StageFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace singular_drift
