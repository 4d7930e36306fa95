#include "singular_drift/sde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "singular_drift/errors.hpp"
#include "singular_drift/parallel.hpp"
#include "singular_drift/rng.hpp"
#include "singular_drift/snapshot.hpp"

namespace singular_drift {

void SimConfig::validate() const {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("sim dim must be 1..3");
  if (!(horizon > 0.0)) throw std::invalid_argument("sim horizon must be positive");
  if (steps < 1) throw std::invalid_argument("sim steps must be >= 1");
  if (paths < 1) throw std::invalid_argument("sim paths must be >= 1");
  if (noise_steps < 0 || (noise_steps > 0 && noise_steps % steps != 0))
    throw std::invalid_argument("noise_steps must be a multiple of steps");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"x0", std::vector<double>(c.x0.begin(), c.x0.begin() + c.dim)},
       {"dim", c.dim},
       {"T", c.horizon},
       {"steps", c.steps},
       {"paths", c.paths},
       {"seed", c.seed},
       {"lambda", c.lambda},
       {"noise_steps", c.noise_steps}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  c = SimConfig{};
  c.dim = j.value("dim", c.dim);
  if (j.contains("x0")) {
    const auto x0 = j.at("x0").get<std::vector<double>>();
    if (static_cast<int>(x0.size()) != c.dim) throw std::invalid_argument("x0 must have dim entries");
    std::copy(x0.begin(), x0.end(), c.x0.begin());
  }
  c.horizon = j.value("T", c.horizon);
  c.steps = j.value("steps", c.steps);
  c.paths = j.value("paths", c.paths);
  c.seed = j.value("seed", c.seed);
  c.lambda = j.value("lambda", c.lambda);
  c.noise_steps = j.value("noise_steps", c.noise_steps);
  c.validate();
}

PathEnsemble::PathEnsemble(int paths_, int steps_, int dim_, std::string label_)
    : paths(paths_), steps(steps_), dim(dim_),
      states(static_cast<std::size_t>(paths_) * static_cast<std::size_t>(steps_ + 1) * static_cast<std::size_t>(dim_)),
      label(std::move(label_)) {}

Point PathEnsemble::state(int path, int step) const {
  Point p{};
  for (int c = 0; c < dim; ++c) p[static_cast<std::size_t>(c)] = at(path, step, c);
  return p;
}

std::vector<double> PathEnsemble::marginal(int step, int comp) const {
  std::vector<double> out(static_cast<std::size_t>(paths));
  for (int p = 0; p < paths; ++p) out[static_cast<std::size_t>(p)] = at(p, step, comp);
  return out;
}

std::vector<double> brownian_increments(const SimConfig& cfg, int path) {
  cfg.validate();
  const int fine = cfg.fine_steps();
  const int ratio = fine / cfg.steps;
  const double scale = std::sqrt(cfg.horizon / fine);
  const CounterRng rng(mix64(cfg.seed));
  std::vector<double> out(static_cast<std::size_t>(cfg.steps) * static_cast<std::size_t>(cfg.dim), 0.0);
  for (int m = 0; m < cfg.steps; ++m) {
    double* dw = out.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(cfg.dim);
    for (int j = 0; j < ratio; ++j) {
      const auto k = static_cast<std::uint32_t>(m * ratio + j);
      const auto z01 = rng.normals({k, static_cast<std::uint32_t>(path), 0u, 0u});
      const auto z23 = rng.normals({k, static_cast<std::uint32_t>(path), 0u, 1u});
      const std::array<double, 4> z{z01[0], z01[1], z23[0], z23[1]};
      for (int c = 0; c < cfg.dim; ++c) dw[c] += scale * z[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

double min_singular_value(std::span<const double> m, int dim) {
  if (dim == 1) return std::abs(m[0]);
  if (dim == 2) {
    const double frob = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
    const double det = m[0] * m[3] - m[1] * m[2];
    const double disc = std::sqrt(std::max(0.0, frob * frob - 4.0 * det * det));
    return std::sqrt(std::max(0.0, 0.5 * (frob - disc)));
  }
  // Smallest eigenvalue of the symmetric M^T M by the trigonometric formula.
  double g[3][3]{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) g[i][j] += m[static_cast<std::size_t>(k * 3 + i)] * m[static_cast<std::size_t>(k * 3 + j)];
  const double p1 = g[0][1] * g[0][1] + g[0][2] * g[0][2] + g[1][2] * g[1][2];
  const double q = (g[0][0] + g[1][1] + g[2][2]) / 3.0;
  const double p2 = (g[0][0] - q) * (g[0][0] - q) + (g[1][1] - q) * (g[1][1] - q) + (g[2][2] - q) * (g[2][2] - q) + 2.0 * p1;
  if (p2 <= 0.0) return std::sqrt(std::max(0.0, q));
  const double p = std::sqrt(p2 / 6.0);
  double b[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (g[i][j] - (i == j ? q : 0.0)) / p;
  const double r = 0.5 * (b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                          b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]));
  const double phi = std::acos(std::clamp(r, -1.0, 1.0)) / 3.0;
  const double smallest = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return std::sqrt(std::max(0.0, smallest));
}

namespace {

Coefficients coefficients_at_x(const TransformContext& ctx, double lambda, double t, const Point& x) {
  const int d = ctx.dim();
  Coefficients out;
  out.x = x;
  std::array<double, kMaxDim> u{};
  std::array<double, kMaxDim * kMaxDim> jac{};
  ctx.u_at(t, x, std::span(u.data(), static_cast<std::size_t>(d)), std::span(jac.data(), static_cast<std::size_t>(d * d)));
  for (int i = 0; i < d; ++i) {
    out.mu[static_cast<std::size_t>(i)] = (lambda + 1.0) * u[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) {
      const auto at = static_cast<std::size_t>(i * d + j);
      out.sigma[at] = (i == j ? 1.0 : 0.0) + jac[at];
    }
  }
  const double smin = min_singular_value(std::span<const double>(out.sigma.data(), static_cast<std::size_t>(d * d)), d);
  if (smin < 0.5)
    throw AssumptionViolated("diffusion coefficient degenerate: smallest singular value " + std::to_string(smin) +
                             " < 1/2 at t = " + std::to_string(t));
  return out;
}

// y_next = (y + mu dt) + sigma dW, the summation order every route shares.
void euler_update(const Coefficients& c, int d, double dt, const double* y, const double* dw, double* next) {
  for (int i = 0; i < d; ++i) {
    double noise = 0.0;
    for (int j = 0; j < d; ++j) noise += c.sigma[static_cast<std::size_t>(i * d + j)] * dw[j];
    next[i] = (y[i] + c.mu[static_cast<std::size_t>(i)] * dt) + noise;
  }
}

nlohmann::json rng_provenance(const SimConfig& cfg) {
  return {{"seed", cfg.seed},
          {"generator", std::string(CounterRng::kDescription)},
          {"stream", "key mix64(seed); counter (fine step, path, 0, pair); increments summed over noise_steps/steps fine steps"},
          {"noise_steps", cfg.fine_steps()},
          {"config", cfg}};
}

}  // namespace

Coefficients coefficients(const TransformContext& ctx, double lambda, double t, const Point& y) {
  return coefficients_at_x(ctx, lambda, t, ctx.psi(t, y));
}

PathEnsemble simulate_y(const TransformContext& ctx, const SimConfig& cfg, PathEnsemble* virtual_x) {
  cfg.validate();
  if (cfg.dim != ctx.dim()) throw std::invalid_argument("sim dim does not match u");
  const int d = cfg.dim;
  const double dt = cfg.dt();
  PathEnsemble y(cfg.paths, cfg.steps, d, "y");
  y.provenance = rng_provenance(cfg);
  if (virtual_x) {
    *virtual_x = PathEnsemble(cfg.paths, cfg.steps, d, "virtual");
    virtual_x->provenance = y.provenance;
  }
  const Point y0 = ctx.phi(0.0, cfg.x0);
  parallel_for(static_cast<std::size_t>(cfg.paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    const auto dw = brownian_increments(cfg, p);
    for (int c = 0; c < d; ++c) y.at(p, 0, c) = y0[static_cast<std::size_t>(c)];
    for (int m = 0; m < cfg.steps; ++m) {
      const auto coef = coefficients(ctx, cfg.lambda, m * dt, y.state(p, m));
      if (virtual_x)
        for (int c = 0; c < d; ++c) virtual_x->at(p, m, c) = coef.x[static_cast<std::size_t>(c)];
      euler_update(coef, d, dt, &y.at(p, m, 0), dw.data() + static_cast<std::size_t>(m * d), &y.at(p, m + 1, 0));
    }
    if (virtual_x) {
      const Point last = ctx.psi(cfg.horizon, y.state(p, cfg.steps));
      for (int c = 0; c < d; ++c) virtual_x->at(p, cfg.steps, c) = last[static_cast<std::size_t>(c)];
    }
  });
  return y;
}

PathEnsemble virtual_x(const TransformContext& ctx, const PathEnsemble& y, const SimConfig& cfg) {
  if (y.steps != cfg.steps || y.dim != ctx.dim()) throw std::invalid_argument("ensemble does not match config");
  PathEnsemble x(y.paths, y.steps, y.dim, "virtual");
  x.provenance = y.provenance;
  const double dt = cfg.dt();
  parallel_for(static_cast<std::size_t>(y.paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    for (int m = 0; m <= y.steps; ++m) {
      const Point xm = ctx.psi(m == y.steps ? cfg.horizon : m * dt, y.state(p, m));
      for (int c = 0; c < y.dim; ++c) x.at(p, m, c) = xm[static_cast<std::size_t>(c)];
    }
  });
  return x;
}

PathEnsemble simulate_classical(const TimeField& b, const SimConfig& cfg, const std::string& label) {
  cfg.validate();
  if (b.grid().dim() != cfg.dim || b.components() != cfg.dim) throw std::invalid_argument("drift does not match sim dim");
  const NodeInterpolant drift(b);
  const int d = cfg.dim;
  const double dt = cfg.dt();
  PathEnsemble x(cfg.paths, cfg.steps, d, label);
  x.provenance = rng_provenance(cfg);
  parallel_for(static_cast<std::size_t>(cfg.paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    const auto dw = brownian_increments(cfg, p);
    for (int c = 0; c < d; ++c) x.at(p, 0, c) = cfg.x0[static_cast<std::size_t>(c)];
    Coefficients coef;
    for (int i = 0; i < d; ++i) coef.sigma[static_cast<std::size_t>(i * d + i)] = 1.0;
    for (int m = 0; m < cfg.steps; ++m) {
      drift.eval(m * dt, x.state(p, m), std::span(coef.mu.data(), static_cast<std::size_t>(d)), {});
      euler_update(coef, d, dt, &x.at(p, m, 0), dw.data() + static_cast<std::size_t>(m * d), &x.at(p, m + 1, 0));
    }
  });
  return x;
}

PathEnsemble brownian_ensemble(const SimConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim;
  PathEnsemble x(cfg.paths, cfg.steps, d, "brownian");
  x.provenance = rng_provenance(cfg);
  parallel_for(static_cast<std::size_t>(cfg.paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    const auto dw = brownian_increments(cfg, p);
    for (int c = 0; c < d; ++c) x.at(p, 0, c) = cfg.x0[static_cast<std::size_t>(c)];
    for (int m = 0; m < cfg.steps; ++m)
      for (int c = 0; c < d; ++c) x.at(p, m + 1, c) = x.at(p, m, c) + dw[static_cast<std::size_t>(m * d + c)];
  });
  return x;
}

double virtual_residual(const TransformContext& ctx, const PathEnsemble& x, const SimConfig& cfg) {
  cfg.validate();
  if (x.steps != cfg.steps || x.dim != ctx.dim() || x.paths != cfg.paths)
    throw std::invalid_argument("ensemble does not match config");
  const int d = x.dim;
  const double dt = cfg.dt();
  std::vector<double> per_path(static_cast<std::size_t>(x.paths), 0.0);
  const Point start = ctx.phi(0.0, cfg.x0);
  parallel_for(per_path.size(), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    const auto dw = brownian_increments(cfg, p);
    std::array<double, kMaxDim> acc{}, next{}, u{};
    for (int c = 0; c < d; ++c) acc[static_cast<std::size_t>(c)] = start[static_cast<std::size_t>(c)];
    double worst = 0.0;
    for (int m = 0; m <= cfg.steps; ++m) {
      const double t = m == cfg.steps ? cfg.horizon : m * dt;
      const Point xm = x.state(p, m);
      ctx.u_at(t, xm, std::span(u.data(), static_cast<std::size_t>(d)));
      Point rhs{};
      for (int c = 0; c < d; ++c) rhs[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)] - u[static_cast<std::size_t>(c)];
      worst = std::max(worst, distance(rhs, xm, d));
      if (m == cfg.steps) break;
      const auto coef = coefficients_at_x(ctx, cfg.lambda, t, xm);
      euler_update(coef, d, dt, acc.data(), dw.data() + static_cast<std::size_t>(m * d), next.data());
      acc = next;
    }
    per_path[pi] = worst;
  });
  return *std::max_element(per_path.begin(), per_path.end());
}

void write_ensemble(const std::filesystem::path& path, const PathEnsemble& e, const nlohmann::json& cfg) {
  const nlohmann::json header = {{"cfg", cfg},
                                 {"label", e.label},
                                 {"provenance", e.provenance},
                                 {"paths", e.paths},
                                 {"steps", e.steps},
                                 {"dim", e.dim},
                                 {"layout", "u64 LE header length, JSON header, f64 LE states [path][step][component]"}};
  const std::string text = header.dump();
  std::string bytes;
  const std::uint64_t length = text.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((length >> (8 * i)) & 0xffu));
  bytes += text;
  snapshot::append_le_doubles(bytes, e.states);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PathEnsemble read_ensemble(const std::filesystem::path& path, nlohmann::json* cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  std::uint64_t length = 0;
  if (bytes.size() < sizeof length) throw FormatError("ensemble file truncated");
  for (int i = 0; i < 8; ++i)
    length |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)])) << (8 * i);
  if (bytes.size() < sizeof length + length) throw FormatError("ensemble header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(sizeof length, length));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad ensemble header: ") + e.what());
  }
  PathEnsemble e(header.at("paths").get<int>(), header.at("steps").get<int>(), header.at("dim").get<int>(),
                 header.at("label").get<std::string>());
  e.provenance = header.value("provenance", nlohmann::json::object());
  auto states = snapshot::parse_le_doubles(std::string_view(bytes).substr(sizeof length + length));
  if (states.size() != e.states.size()) throw FormatError("ensemble payload size does not match header");
  e.states = std::move(states);
  if (cfg) *cfg = header.value("cfg", nlohmann::json::object());
  return e;
}

}  // namespace singular_drift
