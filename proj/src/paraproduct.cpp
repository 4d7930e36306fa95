#include "singular_drift/paraproduct.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "singular_drift/errors.hpp"
#include "singular_drift/fft.hpp"

namespace singular_drift {
namespace {

double smooth_step_seed(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double smooth_step(double t) {
  const double a = smooth_step_seed(t);
  const double b = smooth_step_seed(1.0 - t);
  return a / (a + b);
}

SpectralField scalar_product(const SpectralField& f, const SpectralField& g) {
  const auto& grid = f.grid();
  const int padded = 2 * grid.modes();
  const auto fp = f.resampled(padded);
  const auto gp = g.resampled(padded);
  auto fv = fp.complex_values(0);
  const auto gv = gp.complex_values(0);
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] *= gv[i];
  SpectralField prod(fp.grid(), 1, f.is_real() && g.is_real());
  fft::forward(grid.dim(), padded, fv, prod.coeffs(0));
  const double norm = 1.0 / static_cast<double>(fp.grid().size());
  for (auto& z : prod.coeffs(0)) z *= norm;
  return prod.resampled(grid.modes());
}

}  // namespace

double cutoff_profile(double r) {
  if (r < 0.0) throw std::invalid_argument("cutoff profile takes r >= 0");
  if (r <= 1.0) return 1.0;
  if (r >= 1.5) return 0.0;
  return smooth_step(3.0 - 2.0 * r);
}

int grid_limit_level(const GridSpec& grid) {
  const double kmax = grid.max_wavenumber();
  int j = 0;
  while (std::ldexp(1.0, j) < kmax) ++j;
  return j;
}

SpectralField dealiased_product(const SpectralField& f, const SpectralField& g) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("product factors must share a grid");
  if (f.components() != g.components() && f.components() != 1 && g.components() != 1)
    throw std::invalid_argument("product factors have incompatible component counts");
  const int components = std::max(f.components(), g.components());
  std::vector<SpectralField> parts;
  parts.reserve(static_cast<std::size_t>(components));
  for (int c = 0; c < components; ++c)
    parts.push_back(scalar_product(f.component(f.components() == 1 ? 0 : c),
                                   g.component(g.components() == 1 ? 0 : c)));
  return SpectralField::stack(parts);
}

ProductResult regularized_product(const SpectralField& f, const SpectralField& g,
                                  const ProductOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("product tolerance must be positive");
  const int top = grid_limit_level(f.grid());
  const int first = std::clamp(opts.start_level, 0, std::max(top - 1, 0));

  auto iterate = [&](int j) { return dealiased_product(dyadic_cutoff(f, j), dyadic_cutoff(g, j)); };

  SpectralField previous = iterate(first);
  double increment = 0.0;
  for (int j = first + 1; j <= top; ++j) {
    SpectralField current = iterate(j);
    increment = sobolev_norm(current - previous, opts.idx);
    if (increment < opts.tol) return {std::move(current), j, increment, true};
    previous = std::move(current);
  }
  if (top == first) return {std::move(previous), top, 0.0, true};
  if (!opts.accept_grid_limit)
    throw NonConvergent("regularized product did not stabilize before level " + std::to_string(top) +
                        " (last increment " + std::to_string(increment) + ")");
  return {std::move(previous), top, increment, false};
}

SpectralField product(const SpectralField& f, const SpectralField& g, double tol,
                      const SobolevIndex& idx) {
  ProductOptions opts;
  opts.tol = tol;
  opts.idx = idx;
  return regularized_product(f, g, opts).value;
}

DriftProductResult drift_gradient_product(const SpectralField& b, const SpectralField& u,
                                          const ProductOptions& opts) {
  const int d = b.grid().dim();
  if (b.components() != d || u.components() != d)
    throw std::invalid_argument("drift and solution must both have d components");
  DriftProductResult out{SpectralField(b.grid(), d, b.is_real() && u.is_real()), 0, true};
  for (int i = 0; i < d; ++i) {
    const auto grad = gradient(u.component(i));
    SpectralField sum(b.grid(), 1, true);
    for (int j = 0; j < d; ++j) {
      auto r = regularized_product(b.component(j), grad.component(j), opts);
      out.max_level = std::max(out.max_level, r.level);
      out.resolved = out.resolved && r.resolved;
      sum += r.value;
    }
    std::copy(sum.coeffs(0).begin(), sum.coeffs(0).end(), out.value.coeffs(i).begin());
  }
  return out;
}

double product_bound_ratio(const SpectralField& f, const SpectralField& g, double beta,
                           double delta, double p, double q) {
  const int d = f.grid().dim();
  if (!(beta > 0.0 && beta < delta)) throw std::invalid_argument("need 0 < beta < delta");
  if (!(q > std::max(p, d / delta))) throw std::invalid_argument("need q > max(p, d/delta)");
  ProductOptions opts;
  opts.tol = 1e-12;
  opts.idx = SobolevIndex(-beta, p);
  opts.accept_grid_limit = true;
  const auto fg = regularized_product(f, g, opts).value;
  const double numerator = sobolev_norm(fg, SobolevIndex(-beta, p));
  if (numerator == 0.0) return 0.0;
  return numerator / (sobolev_norm(f, SobolevIndex(delta, p)) * sobolev_norm(g, SobolevIndex(-beta, q)));
}

}  // namespace singular_drift
