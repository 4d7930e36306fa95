#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "singular_drift/errors.hpp"
#include "singular_drift/kolmogorov.hpp"
#include "singular_drift/sde.hpp"

using namespace singular_drift;

namespace {

SimConfig small_config(int dim = 1, int paths = 200, int steps = 16) {
  SimConfig c;
  c.dim = dim;
  c.paths = paths;
  c.steps = steps;
  c.seed = 42;
  c.x0 = {0.3, -0.2, 0.1};
  return c;
}

TimeField sine_u(double amp, int intervals = 16) {
  const GridSpec g(1, 32);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = amp * std::sin(g.sample_point(i)[0]);
  return TimeField::constant_in_time(TimeGrid(1.0, intervals), SpectralField::from_values(g, 1, v));
}

struct ThreadCap {
  explicit ThreadCap(const char* n) { setenv("SINGULAR_DRIFT_THREADS", n, 1); }
  ~ThreadCap() { unsetenv("SINGULAR_DRIFT_THREADS"); }
};

}  // namespace

TEST_CASE("config validation and JSON") {
  auto c = small_config();
  c.noise_steps = 24;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.noise_steps = 32;
  CHECK_NOTHROW(c.validate());
  CHECK(c.fine_steps() == 32);
  const nlohmann::json j = c;
  const auto back = j.get<SimConfig>();
  CHECK(back.noise_steps == 32);
  CHECK(back.x0[0] == 0.3);
  CHECK(back.seed == 42);
  CHECK_THROWS_AS((nlohmann::json{{"dim", 2}, {"x0", {1.0}}}.get<SimConfig>()), std::invalid_argument);
}

TEST_CASE("coarse increments are sums of fine increments") {
  auto fine = small_config(2, 3, 8);
  auto coarse = fine;
  coarse.steps = 4;
  coarse.noise_steps = 8;
  for (int p = 0; p < 3; ++p) {
    const auto a = brownian_increments(fine, p);
    const auto b = brownian_increments(coarse, p);
    for (int m = 0; m < 4; ++m)
      for (int c = 0; c < 2; ++c)
        CHECK(b[static_cast<std::size_t>(m * 2 + c)] ==
              doctest::Approx(a[static_cast<std::size_t>(2 * m * 2 + c)] + a[static_cast<std::size_t>((2 * m + 1) * 2 + c)]).epsilon(1e-15));
  }
  // Different paths and seeds give different noise.
  CHECK(brownian_increments(fine, 0)[0] != brownian_increments(fine, 1)[0]);
  auto other = fine;
  other.seed = 43;
  CHECK(brownian_increments(other, 0)[0] != brownian_increments(fine, 0)[0]);
}

TEST_CASE("zero drift reproduces x0 + W bit for bit") {
  for (int dim : {1, 2}) {
    const auto cfg = small_config(dim, 100, 8);
    const auto u = TimeField::zeros(TimeGrid(1.0, 8), GridSpec(dim, 8), dim);
    const TransformContext ctx(u);
    PathEnsemble x;
    const auto y = simulate_y(ctx, cfg, &x);
    const auto w = brownian_ensemble(cfg);
    CHECK(y.states == w.states);
    CHECK(x.states == w.states);
    CHECK(virtual_x(ctx, y, cfg).states == w.states);
    const auto classical = simulate_classical(u, cfg);
    CHECK(classical.states == w.states);
  }
}

TEST_CASE("Brownian marginals") {
  auto cfg = small_config(2, 10000, 4);
  cfg.horizon = 2.0;
  const auto w = brownian_ensemble(cfg);
  const double n = cfg.paths;
  for (int c = 0; c < 2; ++c) {
    const auto x = w.marginal(4, c);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    CHECK(std::abs(mean - cfg.x0[static_cast<std::size_t>(c)]) < 4.0 * std::sqrt(cfg.horizon / n));
    CHECK(std::abs(var - cfg.horizon) < 4.0 * cfg.horizon * std::sqrt(2.0 / (n - 1.0)));
  }
}

TEST_CASE("results do not depend on the worker count") {
  const auto cfg = small_config(1, 64, 16);
  const TransformContext ctx(sine_u(0.3));
  PathEnsemble one, four;
  {
    ThreadCap cap("1");
    one = simulate_y(ctx, cfg);
  }
  {
    ThreadCap cap("4");
    four = simulate_y(ctx, cfg);
  }
  CHECK(one.states == four.states);
}

TEST_CASE("constant drift in the classical scheme") {
  const auto cfg = small_config(1, 50, 10);
  const std::vector<double> c{0.7};
  const auto b = TimeField::constant_in_time(TimeGrid(1.0, 10), SpectralField::constant(GridSpec(1, 8), c));
  const auto x = simulate_classical(b, cfg);
  const auto w = brownian_ensemble(cfg);
  for (int p = 0; p < cfg.paths; ++p) CHECK(x.at(p, 10, 0) == doctest::Approx(w.at(p, 10, 0) + 0.7).epsilon(1e-12));
}

TEST_CASE("coefficients and the virtual identity") {
  const TransformContext ctx(sine_u(0.4));
  const auto coef = coefficients(ctx, 3.0, 0.5, Point{1.0, 0.0, 0.0});
  const double x = coef.x[0];
  CHECK(x + 0.4 * std::sin(x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(coef.mu[0] == doctest::Approx(4.0 * 0.4 * std::sin(x)).epsilon(1e-12));
  CHECK(coef.sigma[0] == doctest::Approx(1.0 + 0.4 * std::cos(x)).epsilon(1e-12));

  auto cfg = small_config(1, 100, 16);
  cfg.lambda = 3.0;
  PathEnsemble vx;
  simulate_y(ctx, cfg, &vx);
  // X is psi(Y) to the inverse tolerance, so the identity holds to that level.
  CHECK(virtual_residual(ctx, vx, cfg) < 1e-10);

  const auto loose = TransformContext::uncertified(sine_u(0.6));
  CHECK_THROWS_AS(coefficients(loose, 1.0, 0.0, Point{std::numbers::pi, 0.0, 0.0}), AssumptionViolated);
}

TEST_CASE("smallest singular value") {
  const std::vector<double> two{3.0, 0.0, 0.0, 0.5};
  CHECK(min_singular_value(two, 2) == doctest::Approx(0.5));
  // Rotation times diag(2, 0.7): singular values are preserved.
  const double a = 0.4;
  const std::vector<double> rot{2.0 * std::cos(a), -0.7 * std::sin(a), 2.0 * std::sin(a), 0.7 * std::cos(a)};
  CHECK(min_singular_value(rot, 2) == doctest::Approx(0.7).epsilon(1e-12));
  const std::vector<double> three{1.5, 0.0, 0.0, 0.0, 0.0, -0.8, 0.0, 0.6, 0.0};
  CHECK(min_singular_value(three, 3) == doctest::Approx(0.6).epsilon(1e-12));
  const std::vector<double> ident{1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(min_singular_value(ident, 3) == doctest::Approx(1.0));
  const std::vector<double> one{-0.3};
  CHECK(min_singular_value(one, 1) == doctest::Approx(0.3));
}

TEST_CASE("ensemble files round trip") {
  const auto cfg = small_config(2, 5, 3);
  const auto w = brownian_ensemble(cfg);
  const auto path = std::filesystem::temp_directory_path() / "sd_test_ensemble.ens";
  write_ensemble(path, w, cfg);
  nlohmann::json back_cfg;
  const auto back = read_ensemble(path, &back_cfg);
  CHECK(back.states == w.states);
  CHECK(back.label == "brownian");
  CHECK(back.dim == 2);
  CHECK(back_cfg.get<SimConfig>().paths == 5);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_ensemble(path), FormatError);
  std::ofstream(path, std::ios::binary) << "abc";
  CHECK_THROWS_AS(read_ensemble(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_ensemble(path), FormatError);
}
