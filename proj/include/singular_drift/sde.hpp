#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "singular_drift/zvonkin.hpp"

namespace singular_drift {

struct SimConfig {
  Point x0{};
  int dim = 1;
  double horizon = 1.0;
  int steps = 128;
  int paths = 10000;
  std::uint64_t seed = 1;
  /// Must match the lambda of the PDE solve that produced u.
  double lambda = 1.0;
  /// Brownian increments are sums over noise_steps fine increments; 0 means
  /// steps. Equal noise_steps give the same Brownian path at every step count
  /// dividing it.
  int noise_steps = 0;

  int fine_steps() const { return noise_steps > 0 ? noise_steps : steps; }
  double dt() const { return horizon / steps; }
  void validate() const;

  friend void to_json(nlohmann::json& j, const SimConfig& c);
  friend void from_json(const nlohmann::json& j, SimConfig& c);
};

/// paths x (steps+1) x dim states, path-major.
struct PathEnsemble {
  int paths = 0;
  int steps = 0;
  int dim = 1;
  std::vector<double> states;
  std::string label;
  nlohmann::json provenance;

  PathEnsemble() = default;
  PathEnsemble(int paths, int steps, int dim, std::string label);

  double& at(int path, int step, int comp) {
    return states[(static_cast<std::size_t>(path) * static_cast<std::size_t>(steps + 1) + static_cast<std::size_t>(step)) *
                      static_cast<std::size_t>(dim) +
                  static_cast<std::size_t>(comp)];
  }
  double at(int path, int step, int comp) const { return const_cast<PathEnsemble*>(this)->at(path, step, comp); }
  Point state(int path, int step) const;
  /// Component `comp` of every path at `step`.
  std::vector<double> marginal(int step, int comp) const;
};

/// Brownian increments of one path, steps x dim, row-major.
std::vector<double> brownian_increments(const SimConfig& cfg, int path);

struct Coefficients {
  std::array<double, kMaxDim> mu{};
  std::array<double, kMaxDim * kMaxDim> sigma{};
  /// psi(t, y), the point where u was evaluated.
  Point x{};
};

/// mu = (lambda+1) u(t, psi(t,y)), sigma = I + grad u(t, psi(t,y)). Throws
/// AssumptionViolated if the smallest singular value of sigma is below 1/2.
Coefficients coefficients(const TransformContext& ctx, double lambda, double t, const Point& y);

double min_singular_value(std::span<const double> m, int dim);

/// Euler-Maruyama for Y from y = x0 + u(0, x0). When `virtual_x` is non-null
/// it receives X = psi(t, Y), which the coefficient evaluation computes anyway.
PathEnsemble simulate_y(const TransformContext& ctx, const SimConfig& cfg, PathEnsemble* virtual_x = nullptr);

/// X_m = psi(t_m, Y_m) along every path.
PathEnsemble virtual_x(const TransformContext& ctx, const PathEnsemble& y, const SimConfig& cfg);

/// Euler-Maruyama for dX = b(t, X) dt + dW.
PathEnsemble simulate_classical(const TimeField& b, const SimConfig& cfg, const std::string& label = "classical");

/// x0 + W with the Brownian path of cfg, accumulated step by step.
PathEnsemble brownian_ensemble(const SimConfig& cfg);

/// Max over paths and steps of |X_m - rhs_m| where rhs is the right-hand side
/// of the virtual identity X_t = x + u(0,x) - u(t,X_t) + (lambda+1) int u(s,X_s) ds
/// + int (grad u(s,X_s) + I) dW_s with left-point sums.
double virtual_residual(const TransformContext& ctx, const PathEnsemble& x, const SimConfig& cfg);

void write_ensemble(const std::filesystem::path& path, const PathEnsemble& e, const nlohmann::json& cfg);
PathEnsemble read_ensemble(const std::filesystem::path& path, nlohmann::json* cfg = nullptr);

}  // namespace singular_drift
