#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "singular_drift/time_field.hpp"

namespace singular_drift {

enum class DriftFamily { RandomFourier, DerivativeOfContinuous, SmoothTest };

std::string to_string(DriftFamily family);
DriftFamily parse_drift_family(const std::string& name);

struct TimeDependence {
  bool piecewise = false;
  /// Number of resampling points inside (0, T) when piecewise.
  int changes = 0;
};

/// Recipe for a drift b in L^inf([0,T]; H^{-beta}).
///
/// random-fourier: c_kappa = amplitude * xi_kappa * |kappa|^{-decay} with xi
///   uniform on the unit circle, Hermitian, c_0 = 0.
/// derivative-of-continuous: b = grad w for a Gaussian random periodic field w
///   with |w_kappa| ~ amplitude * |kappa|^{-decay-1}.
/// smooth-test: b_j = amplitude * sin(x_j), plus seeded modes 2..bandwidth
///   decaying as |kappa|^{-decay} when bandwidth > 1.
struct DriftSpec {
  DriftFamily family = DriftFamily::RandomFourier;
  std::uint64_t seed = 1;
  double beta = 0.25;
  double decay = 0.3;
  double amplitude = 1.0;
  TimeDependence time_dependence;
  int bandwidth = 1;

  void validate() const;

  friend void to_json(nlohmann::json& j, const DriftSpec& s);
  friend void from_json(const nlohmann::json& j, DriftSpec& s);
};

/// Default decay exponent placing a random-fourier drift just inside H^{-beta}_2.
inline double critical_decay(double beta) { return 0.5 - beta + 0.05; }

struct Kappa {
  double delta = 0.5;
  double p = 2.5;
};

/// The admissible set K(beta, q) of (delta, p): beta < delta < 1-beta, d/delta < p < q.
struct KappaRegion {
  double beta = 0.25;
  double q = 3.0;
  int dim = 1;

  double q_tilde() const { return dim / (1.0 - beta); }
  bool contains(const Kappa& k) const;
};

TimeField generate(const DriftSpec& spec, const GridSpec& grid, const TimeGrid& time);

/// Sup over time nodes of max(||b(t)||_{H^{-beta}_{q~}}, ||b(t)||_{H^{-beta}_q}).
double drift_norm(const TimeField& b, double beta, double q);

struct AssumptionReport {
  double beta = 0.0;
  double q = 0.0;
  double q_tilde = 0.0;
  double norm_q_tilde = 0.0;
  double norm_q = 0.0;
  double norm = 0.0;
  /// Same quantity with every node represented on the doubled lattice.
  double refined_norm = 0.0;
  double relative_change = 0.0;
  bool finite = true;
  bool stable = true;

  friend void to_json(nlohmann::json& j, const AssumptionReport& r);
};

/// Verifies beta in (0, 1/2), q in (d/(1-beta), d/beta), and finiteness of the
/// H^{-beta}_{q~,q} norm; throws AssumptionViolated naming the failed condition.
AssumptionReport assumption_check(const TimeField& b, double beta, double q);

/// delta = 1/2, p = midpoint of (d/delta, q).
Kappa pick_kappa(const KappaRegion& region, int dim);

/// spectral mollification of every node for each n (strictly increasing).
std::vector<TimeField> mollified_sequence(const TimeField& b, std::span<const int> n_list);

}  // namespace singular_drift
