#include "singular_drift/drifts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "singular_drift/errors.hpp"
#include "singular_drift/rng.hpp"

namespace singular_drift {
namespace {

constexpr std::uint32_t kIndexOffset = 1u << 30;

// Hermitian pairs are drawn once, keyed by the representative whose first
// non-zero signed index is positive. Keys use signed lattice indices so the
// low modes coincide on every lattice size.
bool is_canonical(const std::array<int, kMaxDim>& k, int dim) {
  for (int a = 0; a < dim; ++a) {
    const int v = k[static_cast<std::size_t>(a)];
    if (v != 0) return v > 0;
  }
  return false;
}

CounterRng::Counter mode_counter(int component, const std::array<int, kMaxDim>& k) {
  return {static_cast<std::uint32_t>(component), static_cast<std::uint32_t>(k[0]) + kIndexOffset,
          static_cast<std::uint32_t>(k[1]) + kIndexOffset, static_cast<std::uint32_t>(k[2]) + kIndexOffset};
}

std::uint64_t segment_key(std::uint64_t seed, int segment, DriftFamily family) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(segment) * 0x100000001B3ull +
                            static_cast<std::uint64_t>(family) + 1));
}

// Visit each canonical lattice point with its signed indices.
template <typename Fn>
void for_canonical_modes(const GridSpec& grid, Fn&& fn) {
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    if (grid.is_nyquist(flat)) continue;
    const auto idx = grid.unflatten(flat);
    std::array<int, kMaxDim> k{};
    for (int a = 0; a < grid.dim(); ++a) k[static_cast<std::size_t>(a)] = grid.signed_index(idx[static_cast<std::size_t>(a)]);
    if (!is_canonical(k, grid.dim())) continue;
    fn(flat, k);
  }
}

void set_pair(SpectralField& f, int component, std::size_t flat, Complex value) {
  f.coeffs(component)[flat] = value;
  f.coeffs(component)[f.grid().mirror(flat)] = std::conj(value);
}

SpectralField random_fourier(const DriftSpec& spec, const GridSpec& grid, const CounterRng& rng) {
  SpectralField b(grid, grid.dim(), true);
  for (int c = 0; c < grid.dim(); ++c) {
    for_canonical_modes(grid, [&](std::size_t flat, const std::array<int, kMaxDim>& k) {
      const double phase = 2.0 * std::numbers::pi * rng.uniforms(mode_counter(c, k))[0];
      const double magnitude = spec.amplitude * std::pow(std::sqrt(grid.wavevector_norm2(flat)), -spec.decay);
      set_pair(b, c, flat, std::polar(magnitude, phase));
    });
  }
  return b;
}

SpectralField derivative_of_continuous(const DriftSpec& spec, const GridSpec& grid, const CounterRng& rng) {
  SpectralField w(grid, 1, true);
  for_canonical_modes(grid, [&](std::size_t flat, const std::array<int, kMaxDim>& k) {
    const auto z = rng.normals(mode_counter(0, k));
    const double scale = spec.amplitude * std::pow(std::sqrt(grid.wavevector_norm2(flat)), -spec.decay - 1.0);
    set_pair(w, 0, flat, Complex(z[0], z[1]) * (scale / std::numbers::sqrt2));
  });
  return gradient(w);
}

SpectralField smooth_test(const DriftSpec& spec, const GridSpec& grid, const CounterRng& rng) {
  SpectralField b(grid, grid.dim(), true);
  const double fundamental = 2.0 * std::numbers::pi / grid.period();
  for (int c = 0; c < grid.dim(); ++c) {
    // amplitude * sin(kappa_1 x_c)
    std::array<int, kMaxDim> idx{};
    idx[static_cast<std::size_t>(c)] = 1;
    set_pair(b, c, grid.flatten(idx), Complex(0.0, -0.5 * spec.amplitude));
    if (spec.bandwidth <= 1) continue;
    for_canonical_modes(grid, [&](std::size_t flat, const std::array<int, kMaxDim>& k) {
      int linf = 0;
      for (int a = 0; a < grid.dim(); ++a) linf = std::max(linf, std::abs(k[static_cast<std::size_t>(a)]));
      if (linf < 2 || linf > spec.bandwidth) return;
      const double phase = 2.0 * std::numbers::pi * rng.uniforms(mode_counter(c, k))[0];
      const double magnitude =
          spec.amplitude * std::pow(std::sqrt(grid.wavevector_norm2(flat)) / fundamental, -spec.decay);
      set_pair(b, c, flat, std::polar(magnitude, phase));
    });
  }
  return b;
}

SpectralField generate_segment(const DriftSpec& spec, const GridSpec& grid, int segment) {
  const CounterRng rng(segment_key(spec.seed, segment, spec.family));
  switch (spec.family) {
    case DriftFamily::RandomFourier:
      return random_fourier(spec, grid, rng);
    case DriftFamily::DerivativeOfContinuous:
      return derivative_of_continuous(spec, grid, rng);
    case DriftFamily::SmoothTest:
      return smooth_test(spec, grid, rng);
  }
  throw InvalidSpec("unknown drift family");
}

bool same_coefficients(const SpectralField& a, const SpectralField& b) {
  return std::equal(a.all_coeffs().begin(), a.all_coeffs().end(), b.all_coeffs().begin(), b.all_coeffs().end());
}

struct NodeNorms {
  double q_tilde = 0.0;
  double q = 0.0;
};

std::vector<NodeNorms> node_norms(const TimeField& b, double beta, double q, double q_tilde, int modes) {
  std::vector<NodeNorms> out;
  out.reserve(static_cast<std::size_t>(b.size()));
  for (int m = 0; m < b.size(); ++m) {
    if (m > 0 && same_coefficients(b[m], b[m - 1])) {
      out.push_back(out.back());
      continue;
    }
    const SpectralField node = modes == b.grid().modes() ? b[m] : b[m].resampled(modes);
    out.push_back({sobolev_norm(node, SobolevIndex(-beta, q_tilde)), sobolev_norm(node, SobolevIndex(-beta, q))});
  }
  return out;
}

}  // namespace

std::string to_string(DriftFamily family) {
  switch (family) {
    case DriftFamily::RandomFourier:
      return "random-fourier";
    case DriftFamily::DerivativeOfContinuous:
      return "derivative-of-continuous";
    case DriftFamily::SmoothTest:
      return "smooth-test";
  }
  return "unknown";
}

DriftFamily parse_drift_family(const std::string& name) {
  if (name == "random-fourier") return DriftFamily::RandomFourier;
  if (name == "derivative-of-continuous") return DriftFamily::DerivativeOfContinuous;
  if (name == "smooth-test") return DriftFamily::SmoothTest;
  throw InvalidSpec("unknown drift family '" + name + "'");
}

void DriftSpec::validate() const {
  if (!(beta > 0.0 && beta < 0.5)) {
    std::ostringstream msg;
    msg << "beta = " << beta << " is outside (0, 1/2)";
    throw InvalidSpec(msg.str());
  }
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw InvalidSpec("amplitude must be finite and >= 0");
  if (!std::isfinite(decay)) throw InvalidSpec("decay must be finite");
  if (time_dependence.piecewise && time_dependence.changes < 0) throw InvalidSpec("change count must be >= 0");
  if (bandwidth < 1) throw InvalidSpec("bandwidth must be >= 1");
}

void to_json(nlohmann::json& j, const DriftSpec& s) {
  j = {{"family", to_string(s.family)},
       {"seed", s.seed},
       {"beta", s.beta},
       {"decay", s.decay},
       {"amplitude", s.amplitude},
       {"bandwidth", s.bandwidth}};
  if (s.time_dependence.piecewise)
    j["time_dependence"] = {{"kind", "piecewise-constant"}, {"changes", s.time_dependence.changes}};
  else
    j["time_dependence"] = {{"kind", "static"}};
}

void from_json(const nlohmann::json& j, DriftSpec& s) {
  s = DriftSpec{};
  s.family = parse_drift_family(j.value("family", std::string("random-fourier")));
  s.seed = j.value("seed", std::uint64_t{1});
  s.beta = j.value("beta", 0.25);
  s.decay = j.value("decay", critical_decay(s.beta));
  s.amplitude = j.value("amplitude", 1.0);
  s.bandwidth = j.value("bandwidth", 1);
  if (j.contains("time_dependence")) {
    const auto& td = j.at("time_dependence");
    const auto kind = td.is_string() ? td.get<std::string>() : td.value("kind", std::string("static"));
    if (kind == "piecewise-constant") {
      s.time_dependence.piecewise = true;
      s.time_dependence.changes = td.is_object() ? td.value("changes", 1) : 1;
    } else if (kind != "static") {
      throw InvalidSpec("unknown time dependence '" + kind + "'");
    }
  }
}

void to_json(nlohmann::json& j, const AssumptionReport& r) {
  j = {{"beta", r.beta},
       {"q", r.q},
       {"q_tilde", r.q_tilde},
       {"norm_q_tilde", r.norm_q_tilde},
       {"norm_q", r.norm_q},
       {"norm", r.norm},
       {"refined_norm", r.refined_norm},
       {"relative_change", r.relative_change},
       {"finite", r.finite},
       {"stable", r.stable}};
}

bool KappaRegion::contains(const Kappa& k) const {
  return beta < k.delta && k.delta < 1.0 - beta && dim / k.delta < k.p && k.p < q;
}

TimeField generate(const DriftSpec& spec, const GridSpec& grid, const TimeGrid& time) {
  spec.validate();
  const int segments = spec.time_dependence.piecewise ? spec.time_dependence.changes + 1 : 1;
  std::vector<SpectralField> pieces;
  pieces.reserve(static_cast<std::size_t>(segments));
  for (int s = 0; s < segments; ++s) pieces.push_back(generate_segment(spec, grid, s));

  std::vector<SpectralField> nodes;
  nodes.reserve(static_cast<std::size_t>(time.nodes()));
  for (int m = 0; m < time.nodes(); ++m) {
    const double fraction = time.node(m) / time.horizon();
    const int segment = std::min(segments - 1, static_cast<int>(std::floor(fraction * segments)));
    nodes.push_back(pieces[static_cast<std::size_t>(segment)]);
  }
  return TimeField(time, std::move(nodes));
}

double drift_norm(const TimeField& b, double beta, double q) {
  const double q_tilde = b.grid().dim() / (1.0 - beta);
  double worst = 0.0;
  for (const auto& n : node_norms(b, beta, q, q_tilde, b.grid().modes()))
    worst = std::max({worst, n.q_tilde, n.q});
  return worst;
}

AssumptionReport assumption_check(const TimeField& b, double beta, double q) {
  const int d = b.grid().dim();
  AssumptionReport r;
  r.beta = beta;
  r.q = q;
  if (!(beta > 0.0 && beta < 0.5)) {
    std::ostringstream msg;
    msg << "0 < beta < 1/2 fails for beta = " << beta;
    throw AssumptionViolated(msg.str());
  }
  r.q_tilde = d / (1.0 - beta);
  if (!(q > r.q_tilde && q < d / beta)) {
    std::ostringstream msg;
    msg << "d/(1-beta) < q < d/beta fails: " << r.q_tilde << " < " << q << " < " << d / beta;
    throw AssumptionViolated(msg.str());
  }

  for (const auto& n : node_norms(b, beta, q, r.q_tilde, b.grid().modes())) {
    r.norm_q_tilde = std::max(r.norm_q_tilde, n.q_tilde);
    r.norm_q = std::max(r.norm_q, n.q);
  }
  r.norm = std::max(r.norm_q_tilde, r.norm_q);
  double refined = 0.0;
  for (const auto& n : node_norms(b, beta, q, r.q_tilde, 2 * b.grid().modes()))
    refined = std::max({refined, n.q_tilde, n.q});
  r.refined_norm = refined;
  r.finite = std::isfinite(r.norm) && std::isfinite(refined);
  if (!r.finite) throw AssumptionViolated("H^{-beta}_{q~,q} norm is not finite");
  r.relative_change = r.norm > 0.0 ? std::abs(refined - r.norm) / r.norm : 0.0;
  r.stable = r.relative_change < 0.01;
  return r;
}

Kappa pick_kappa(const KappaRegion& region, int dim) {
  KappaRegion r = region;
  r.dim = dim;
  const Kappa k{0.5 * (region.beta + (1.0 - region.beta)), 0.0};
  Kappa out{k.delta, 0.5 * (dim / k.delta + region.q)};
  if (!r.contains(out)) {
    std::ostringstream msg;
    msg << "K(beta=" << region.beta << ", q=" << region.q << ") is empty in dimension " << dim;
    throw EmptyRegion(msg.str());
  }
  return out;
}

std::vector<TimeField> mollified_sequence(const TimeField& b, std::span<const int> n_list) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw std::invalid_argument("mollification levels must increase");
  std::vector<TimeField> out;
  out.reserve(n_list.size());
  for (int n : n_list) out.push_back(b.map([n](const SpectralField& f) { return mollify(f, n); }));
  return out;
}

}  // namespace singular_drift
