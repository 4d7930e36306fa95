#include "singular_drift/zvonkin.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "singular_drift/errors.hpp"
#include "singular_drift/kolmogorov.hpp"
#include "singular_drift/rng.hpp"

namespace singular_drift {

NodeInterpolant::NodeInterpolant(const TimeField& f)
    : time_(f.time()), dim_(f.grid().dim()), components_(f.components()), period_(f.grid().period()) {
  nodes_.reserve(static_cast<std::size_t>(f.size()));
  for (const auto& node : f.nodes()) nodes_.emplace_back(node);
}

void NodeInterpolant::eval(double t, const Point& x, std::span<double> values, std::span<double> jacobian) const {
  const double dt = time_.step();
  const int last = time_.intervals();
  const double clamped = std::clamp(t, 0.0, time_.horizon());
  int m = std::min(static_cast<int>(std::floor(clamped / dt)), last - 1);
  double theta = (clamped - time_.node(m)) / dt;
  if (theta >= 1.0) {
    m += 1;
    theta = 0.0;
  }
  theta = std::max(theta, 0.0);
  const auto& left = nodes_[static_cast<std::size_t>(m)];
  if (theta == 0.0) {
    if (jacobian.empty())
      left.values(x, values);
    else
      left.values_and_jacobian(x, values, jacobian);
    return;
  }
  PointEvaluator::blend(left, 1.0 - theta, nodes_[static_cast<std::size_t>(m + 1)], theta, x, values, jacobian);
}

TransformContext::TransformContext(const TimeField& u, TransformOptions options)
    : TransformContext(u, options, true) {}

TransformContext TransformContext::uncertified(const TimeField& u, TransformOptions options) {
  return TransformContext(u, options, false);
}

TransformContext::TransformContext(const TimeField& u, TransformOptions options, bool certify)
    : u_(u), options_(options) {
  if (u.components() != u.grid().dim()) throw std::invalid_argument("u must have d components");
  if (!(options.inverse_tol > 0.0) || options.inverse_max_iter < 1)
    throw std::invalid_argument("invalid inverse options");
  gradient_sup_ = gradient_sup(u);
  value_sup_ = value_sup(u);
  if (certify && !(gradient_sup_ <= 0.5))
    throw AssumptionViolated("gradient certificate fails: sup |grad u| = " + std::to_string(gradient_sup_) +
                             " > 1/2");
}

void TransformContext::u_at(double t, const Point& x, std::span<double> values, std::span<double> jacobian) const {
  u_.eval(t, x, values, jacobian);
}

Point TransformContext::phi(double t, const Point& x) const {
  std::array<double, kMaxDim> u{};
  const int d = dim();
  u_.eval(t, x, std::span(u.data(), static_cast<std::size_t>(d)), {});
  Point out = x;
  for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] += u[static_cast<std::size_t>(i)];
  return out;
}

Point TransformContext::psi(double t, const Point& y, int* iterations) const {
  const int d = dim();
  std::array<double, kMaxDim> u{};
  Point x = y;
  for (int k = 1; k <= options_.inverse_max_iter; ++k) {
    u_.eval(t, x, std::span(u.data(), static_cast<std::size_t>(d)), {});
    Point next = y;
    for (int i = 0; i < d; ++i) next[static_cast<std::size_t>(i)] -= u[static_cast<std::size_t>(i)];
    const double step = distance(next, x, d);
    x = next;
    if (step < options_.inverse_tol) {
      if (iterations) *iterations = k;
      return x;
    }
  }
  throw InverseDiverged("psi did not converge within " + std::to_string(options_.inverse_max_iter) +
                        " iterations at t = " + std::to_string(t));
}

double distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double diff = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    s += diff * diff;
  }
  return std::sqrt(s);
}

namespace {

struct Sampler {
  CounterRng rng;
  std::uint32_t stream;

  // Uniforms u[0..3] for sample i; draws are a pure function of (seed, stream, i).
  std::array<double, 8> draw(int i) const {
    std::array<double, 8> out{};
    for (std::uint32_t j = 0; j < 4; ++j) {
      const auto u = rng.uniforms({static_cast<std::uint32_t>(i), stream, 0u, j});
      out[2 * j] = u[0];
      out[2 * j + 1] = u[1];
    }
    return out;
  }
};

}  // namespace

double lipschitz_probe(const TransformContext& ctx, int samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("lipschitz_probe needs at least 2 samples");
  const int d = ctx.dim();
  const Sampler sampler{CounterRng(seed), 0x11u};
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto u = sampler.draw(i);
    const double t = u[0] * ctx.horizon();
    // Half the pairs are far apart, half at separations down to 1e-6 L.
    const double scale = ctx.period() * ((i % 2 == 0) ? 1.0 : std::pow(10.0, -6.0 * u[1]));
    Point y1{}, y2{};
    for (int c = 0; c < d; ++c) {
      y1[static_cast<std::size_t>(c)] = u[static_cast<std::size_t>(2 + c)] * ctx.period();
      y2[static_cast<std::size_t>(c)] = y1[static_cast<std::size_t>(c)] + scale * (u[static_cast<std::size_t>(5 + c)] - 0.5);
    }
    const double gap = distance(y1, y2, d);
    if (gap == 0.0) continue;
    worst = std::max(worst, distance(ctx.psi(t, y1), ctx.psi(t, y2), d) / gap);
  }
  return worst;
}

double time_continuity_probe(const TransformContext& ctx, double gamma, int samples, std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  const int d = ctx.dim();
  const Sampler sampler{CounterRng(seed), 0x22u};
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto u = sampler.draw(i);
    const double t1 = u[0] * ctx.horizon();
    const double t2 = u[1] * ctx.horizon();
    if (t1 == t2) continue;
    Point y{};
    for (int c = 0; c < d; ++c) y[static_cast<std::size_t>(c)] = u[static_cast<std::size_t>(2 + c)] * ctx.period();
    worst = std::max(worst, distance(ctx.psi(t1, y), ctx.psi(t2, y), d) / std::pow(std::abs(t1 - t2), gamma));
  }
  return worst;
}

RoundTrip round_trip_residuals(const TransformContext& ctx, int samples, std::uint64_t seed) {
  const int d = ctx.dim();
  const Sampler sampler{CounterRng(seed), 0x33u};
  RoundTrip out;
  for (int i = 0; i < samples; ++i) {
    const auto u = sampler.draw(i);
    const double t = u[0] * ctx.horizon();
    Point x{};
    for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(c)] = u[static_cast<std::size_t>(1 + c)] * ctx.period();
    out.psi_of_phi = std::max(out.psi_of_phi, distance(ctx.psi(t, ctx.phi(t, x)), x, d));
    out.phi_of_psi = std::max(out.phi_of_psi, distance(ctx.phi(t, ctx.psi(t, x)), x, d));
  }
  return out;
}

}  // namespace singular_drift
