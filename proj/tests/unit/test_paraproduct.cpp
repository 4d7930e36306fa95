#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "singular_drift/errors.hpp"
#include "singular_drift/paraproduct.hpp"

using namespace singular_drift;

namespace {

SpectralField band_limited(int n, int band, unsigned seed, double decay = 0.0) {
  return SpectralField::from_coefficients(GridSpec(1, n), 1, true, oracle::band_limited_1d(n, band, seed, decay));
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("cutoff profile") {
  CHECK(cutoff_profile(0.0) == 1.0);
  CHECK(cutoff_profile(1.0) == 1.0);
  CHECK(cutoff_profile(1.5) == 0.0);
  CHECK(cutoff_profile(7.0) == 0.0);
  CHECK(cutoff_profile(1.25) == doctest::Approx(0.5));
  double prev = 1.0;
  for (double r = 1.0; r <= 1.5; r += 0.01) {
    const double v = cutoff_profile(r);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  CHECK_THROWS_AS(cutoff_profile(-0.1), std::invalid_argument);
}

TEST_CASE("grid limit level") {
  // max |kappa| = N/2 on [0, 2 pi) in one dimension.
  CHECK(grid_limit_level(GridSpec(1, 64)) == 5);
  CHECK(grid_limit_level(GridSpec(2, 64)) == 6);
}

TEST_CASE("dealiased product equals coefficient convolution") {
  const int n = 64;
  const auto f = band_limited(n, 15, 1);
  const auto g = band_limited(n, 15, 2);
  const auto expected = oracle::convolve_1d(f.coeffs(0), g.coeffs(0), n);
  CHECK(max_abs_diff(dealiased_product(f, g).coeffs(0), expected) < 1e-12);
}

TEST_CASE("regularized product on band-limited inputs is exact") {
  const int n = 128;
  for (unsigned seed = 0; seed < 5; ++seed) {
    const auto f = band_limited(n, 20, 10 + seed, 1.0);
    const auto g = band_limited(n, 20, 20 + seed, 0.5);
    const auto expected = oracle::convolve_1d(f.coeffs(0), g.coeffs(0), n);
    ProductOptions opts;
    const auto r = regularized_product(f, g, opts);
    CHECK(r.resolved);
    CHECK(max_abs_diff(r.value.coeffs(0), expected) < 1e-10);
  }
}

TEST_CASE("product with a constant scales") {
  const int n = 64;
  const auto f = band_limited(n, 10, 3);
  const std::vector<double> c{2.5};
  const auto prod = product(SpectralField::constant(GridSpec(1, n), c), f, 1e-12, {-0.25, 2.0});
  CHECK(max_abs_diff(prod.coeffs(0), (2.5 * f).coeffs(0)) < 1e-12);
}

TEST_CASE("rough inputs hit the grid limit") {
  const int n = 16;
  const auto f = band_limited(n, 7, 4);
  const auto g = band_limited(n, 7, 5);
  ProductOptions opts;
  opts.tol = 1e-14;
  CHECK_THROWS_AS(regularized_product(f, g, opts), NonConvergent);
  opts.accept_grid_limit = true;
  const auto r = regularized_product(f, g, opts);
  CHECK_FALSE(r.resolved);
  CHECK(r.level == grid_limit_level(f.grid()));
}

TEST_CASE("drift-gradient product in one dimension") {
  const int n = 64;
  const auto b = band_limited(n, 12, 6);
  const auto u = band_limited(n, 12, 7, 1.0);
  ProductOptions opts;
  const auto r = drift_gradient_product(b, u, opts);
  const auto expected = product(b, gradient(u), 1e-12, opts.idx);
  CHECK(max_abs_diff(r.value.coeffs(0), expected.coeffs(0)) < 1e-12);
  CHECK(r.resolved);
}

TEST_CASE("product bound ratio") {
  const int n = 64;
  const auto f = band_limited(n, 12, 8, 1.5);
  const auto g = band_limited(n, 12, 9, 0.5);
  const double r = product_bound_ratio(f, g, 0.25, 0.5, 2.5, 3.0);
  CHECK(std::isfinite(r));
  CHECK(r > 0.0);
  CHECK(product_bound_ratio(f, SpectralField(f.grid(), 1), 0.25, 0.5, 2.5, 3.0) == 0.0);
  CHECK_THROWS_AS(product_bound_ratio(f, g, 0.5, 0.25, 2.5, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(product_bound_ratio(f, g, 0.25, 0.5, 2.5, 2.0), std::invalid_argument);
  // The ratio is a property of the band-limited pair, not of the lattice.
  const double refined = product_bound_ratio(f.resampled(2 * n), g.resampled(2 * n), 0.25, 0.5, 2.5, 3.0);
  CHECK(refined == doctest::Approx(r).epsilon(0.05));
}
