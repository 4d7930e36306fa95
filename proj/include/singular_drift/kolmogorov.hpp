#pragma once

#include <utility>
#include <vector>

#include <json.hpp>

#include "singular_drift/drifts.hpp"
#include "singular_drift/time_field.hpp"

namespace singular_drift {

struct PdeConfig {
  /// Killing rate of the Kolmogorov equation.
  double lambda = 1.0;
  /// Weight rate of the equivalent sup norm; <= 0 selects it automatically.
  double rho = 0.0;
  double tol = 1e-9;
  int max_iter = 200;
  double product_tol = 1e-12;
  /// Negative regularity of the drift; products are compared in H^{-beta}_p.
  double beta = 0.25;
  /// Solution space H^{1+delta}_p.
  Kappa kappa{0.5, 2.5};

  SobolevIndex solution_index() const { return {1.0 + kappa.delta, kappa.p}; }

  friend void to_json(nlohmann::json& j, const PdeConfig& c);
  friend void from_json(const nlohmann::json& j, PdeConfig& c);
};

/// I_t(v) = int_0^t P(t-r)(b.grad v)(r) dr + int_0^t P(t-r)(b - lambda v)(r) dr
/// at every node. Each step integrates the semigroup factor exactly per mode
/// with the integrand frozen at the left node.
TimeField integral_operator(const TimeField& v, const TimeField& b, double lambda, const PdeConfig& cfg);

struct SolveReport {
  int iterations = 0;
  double rho = 0.0;
  /// Weighted increments ||v_{k+1} - v_k||^{(rho)} in H^{1+delta}_p.
  std::vector<double> increments;
  /// Same increments without the time weight.
  std::vector<double> unweighted_increments;
  /// increments[k] / increments[k-1]; entry k corresponds to iteration k+1.
  std::vector<double> ratios;
  double final_ratio = 0.0;
  /// ||v - I(v)||^{(rho)} for the returned v.
  double residual = 0.0;
  double unweighted_residual = 0.0;
  /// Whether every regularized product stabilized before the grid limit.
  bool products_resolved = true;

  friend void to_json(nlohmann::json& j, const SolveReport& r);
};

struct PdeSolution {
  TimeField v;
  SolveReport report;
};

/// Picard iteration v_{k+1} = I(v_k) from v_0 = 0 until the weighted and the
/// unweighted increments both drop below cfg.tol.
PdeSolution solve_fwd(const TimeField& b, double lambda, const PdeConfig& cfg);

/// u(t_m) = v(t_{M-m}).
TimeField to_backward(const TimeField& v);

/// max_m exp(-rho t_m) ||f(t_m)||_idx.
double weighted_norm(const TimeField& f, double rho, const SobolevIndex& idx);

/// Max over nodes and grid points of the operator norm of the Jacobian.
double gradient_sup(const TimeField& u);

/// Max over nodes and grid points of |u|.
double value_sup(const TimeField& u);

/// Max over nodes of the grid sup of |f_m - g_m|.
double sup_grid_distance(const TimeField& f, const TimeField& g);

struct Calibration {
  double lambda = 1.0;
  std::vector<std::pair<double, double>> trace;
  PdeSolution solution;
};

/// Doubles lambda from 1 until gradient_sup(u_lambda) <= target.
Calibration calibrate_lambda(const TimeField& b, const PdeConfig& cfg, double target = 0.5);

/// Least-squares slope of log(gradient_sup) against log(lambda) over the last
/// `points` trace entries.
double calibration_slope(const std::vector<std::pair<double, double>>& trace, int points = 4);

/// max_{m<n} ||u(t_n) - u(t_m)||_idx / |t_n - t_m|^gamma.
double holder_diagnostic(const TimeField& u, double gamma, const SobolevIndex& idx);

/// Sup-grid distance between the solutions obtained with two (delta, p) choices.
double uniqueness_crosscheck(const TimeField& b, double lambda, const Kappa& first, const Kappa& second,
                             const PdeConfig& cfg);

/// int_s^t exp(-rho r) r^{-theta} dr by adaptive quadrature after r = w^{1/(1-theta)}.
/// t may be +infinity.
double gamma_integral(double rho, double theta, double s, double t);

/// gamma_integral(rho, theta, s, t) <= Gamma(1-theta) rho^{theta-1}.
bool gamma_bound_check(double rho, double theta, double s, double t);

}  // namespace singular_drift
