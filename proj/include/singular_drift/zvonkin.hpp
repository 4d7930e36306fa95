#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "singular_drift/time_field.hpp"

namespace singular_drift {

/// Point evaluation of a TimeField with linear interpolation between the two
/// bracketing nodes. At a node only that node is evaluated.
class NodeInterpolant {
 public:
  NodeInterpolant() = default;
  explicit NodeInterpolant(const TimeField& f);

  int dim() const { return dim_; }
  int components() const { return components_; }
  double horizon() const { return time_.horizon(); }
  double period() const { return period_; }

  /// `jacobian` may be empty when only values are needed.
  void eval(double t, const Point& x, std::span<double> values, std::span<double> jacobian) const;

 private:
  TimeGrid time_;
  int dim_ = 1;
  int components_ = 0;
  double period_ = 1.0;
  std::vector<PointEvaluator> nodes_;
};

struct TransformOptions {
  double inverse_tol = 1e-12;
  int inverse_max_iter = 80;
};

/// phi(t, x) = x + u(t, x) and its inverse for a backward-time solution u
/// whose gradient is bounded by 1/2.
class TransformContext {
 public:
  /// Throws AssumptionViolated unless gradient_sup(u) <= 1/2.
  explicit TransformContext(const TimeField& u, TransformOptions options = {});

  /// Skips the certificate; psi may then raise InverseDiverged.
  static TransformContext uncertified(const TimeField& u, TransformOptions options = {});

  int dim() const { return u_.dim(); }
  double horizon() const { return u_.horizon(); }
  double period() const { return u_.period(); }
  const TransformOptions& options() const { return options_; }
  /// Measured sup of |grad u| over nodes and grid points.
  double gradient_certificate() const { return gradient_sup_; }
  /// Measured sup of |u|; bounds |phi(t,x) - x|.
  double value_bound() const { return value_sup_; }

  /// u(t, x) and optionally grad u(t, x) (row-major d x d).
  void u_at(double t, const Point& x, std::span<double> values, std::span<double> jacobian = {}) const;

  Point phi(double t, const Point& x) const;

  /// Fixed point x_{k+1} = y - u(t, x_k) from x_0 = y. `iterations` receives
  /// the number of updates when non-null.
  Point psi(double t, const Point& y, int* iterations = nullptr) const;

 private:
  TransformContext(const TimeField& u, TransformOptions options, bool certify);

  NodeInterpolant u_;
  TransformOptions options_;
  double gradient_sup_ = 0.0;
  double value_sup_ = 0.0;
};

/// max |psi(t,y1) - psi(t,y2)| / |y1 - y2| over random (t, y1, y2).
double lipschitz_probe(const TransformContext& ctx, int samples, std::uint64_t seed);

/// max |psi(t1,y) - psi(t2,y)| / |t1 - t2|^gamma over random (t1, t2, y).
double time_continuity_probe(const TransformContext& ctx, double gamma, int samples = 1000,
                             std::uint64_t seed = 7);

/// Round-trip residuals on random (t, x): max |psi(t, phi(t, x)) - x| and
/// max |phi(t, psi(t, y)) - y|.
struct RoundTrip {
  double psi_of_phi = 0.0;
  double phi_of_psi = 0.0;
};
RoundTrip round_trip_residuals(const TransformContext& ctx, int samples, std::uint64_t seed);

double distance(const Point& a, const Point& b, int dim);

}  // namespace singular_drift
