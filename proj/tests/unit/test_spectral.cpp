#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "singular_drift/errors.hpp"
#include "singular_drift/snapshot.hpp"
#include "singular_drift/spectral.hpp"
#include "singular_drift/time_field.hpp"

using namespace singular_drift;

namespace {

SpectralField random_field(const GridSpec& g, int components, unsigned seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> dist;
  std::vector<double> values(g.size() * static_cast<std::size_t>(components));
  for (auto& v : values) v = dist(engine);
  return SpectralField::from_values(g, components, values);
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

SpectralField sine(const GridSpec& g, double amplitude, int k) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = amplitude * std::sin(k * g.sample_point(i)[0]);
  return SpectralField::from_values(g, 1, v);
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(GridSpec(0, 16), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec(4, 16), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec(1, 12), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec(1, 4), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec(1, 16, -1.0), std::invalid_argument);
  const GridSpec g(2, 8);
  CHECK(g.size() == 64);
  CHECK(g.signed_index(4) == -4);
  CHECK(g.mirror(g.mirror(13)) == 13);
  CHECK(g.is_nyquist(4));
  CHECK_FALSE(g.is_nyquist(9));
}

TEST_CASE("sobolev index requires p > 1") {
  CHECK_THROWS_AS(SobolevIndex(0.5, 1.0), std::invalid_argument);
  CHECK_NOTHROW(SobolevIndex(-0.25, 1.5));
}

TEST_CASE("coefficients match a direct DFT") {
  for (int d : {1, 2}) {
    const GridSpec g(d, d == 1 ? 16 : 8, 3.0);
    const auto f = random_field(g, 1, 11u + static_cast<unsigned>(d));
    const auto direct = oracle::direct_coefficients(g, f.values(0));
    CHECK(max_abs_diff(f.coeffs(0), direct) < 1e-13);
    CHECK(f.hermitian_defect() < 1e-15);
  }
}

TEST_CASE("values round trip") {
  const GridSpec g(2, 16);
  const auto f = random_field(g, 2, 3);
  const auto back = SpectralField::from_values(g, 2, [&] {
    auto v0 = f.values(0);
    const auto v1 = f.values(1);
    v0.insert(v0.end(), v1.begin(), v1.end());
    return v0;
  }());
  CHECK(max_abs_diff(f.all_coeffs(), back.all_coeffs()) < 1e-15);
}

TEST_CASE("Parseval") {
  const GridSpec g(2, 32, 2.0);
  const auto f = random_field(g, 2, 5);
  double sum = 0.0;
  for (int c = 0; c < 2; ++c)
    for (const auto z : f.coeffs(c)) sum += std::norm(z);
  const double quadrature = std::pow(lp_norm(f, 2.0), 2.0);
  CHECK(quadrature == doctest::Approx(g.domain_volume() * sum).epsilon(1e-12));
  CHECK(sobolev_norm(f, {1.3, 2.0}) == doctest::Approx(sobolev_norm_parseval(f, 1.3)).epsilon(1e-10));
}

TEST_CASE("Bessel powers are an inverse pair and compose") {
  const GridSpec g(1, 64);
  const auto f = random_field(g, 1, 7);
  const auto back = bessel_power(bessel_power(f, 1.7), -1.7);
  CHECK(max_abs_diff(back.all_coeffs(), f.all_coeffs()) < 1e-10);
  const auto two = bessel_power(bessel_power(f, 0.4), 0.6);
  const auto one = bessel_power(f, 1.0);
  CHECK(max_abs_diff(two.all_coeffs(), one.all_coeffs()) < 1e-10);
  // A^1 = I - Laplacian/2 acting on sin(3x): (1 + 9/2) sin(3x).
  const auto s = sine(g, 1.0, 3);
  const auto as = bessel_power(s, 2.0);
  CHECK(max_abs_diff(as.all_coeffs(), (5.5 * s).all_coeffs()) < 1e-12);
}

TEST_CASE("heat semigroup law and kernel cross-check") {
  const GridSpec g(1, 64);
  const auto f = random_field(g, 1, 9);
  const auto ts = heat_semigroup(heat_semigroup(f, 0.2), 0.3);
  const auto t = heat_semigroup(f, 0.5);
  CHECK(max_abs_diff(ts.all_coeffs(), t.all_coeffs()) < 1e-10);
  CHECK(max_abs_diff(heat_semigroup(f, 0.0).all_coeffs(), f.all_coeffs()) == 0.0);
  CHECK_THROWS_AS(heat_semigroup(f, -0.1), std::invalid_argument);

  // Smooth input so the rectangle rule of the kernel oracle is exact to round-off.
  const auto smooth = mollify(f, 4);
  const auto expected = oracle::heat_kernel_convolution(g, smooth.values(0), 0.1);
  const auto got = heat_semigroup(smooth, 0.1).values(0);
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - expected[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("norm of a pure mode") {
  // ||sin(kx)||_{H^s_2} on [0, 2 pi) is (1 + k^2/2)^{s/2} sqrt(pi).
  const GridSpec g(1, 64);
  const auto s = sine(g, 1.0, 5);
  const double expected = std::pow(1.0 + 12.5, 0.75) * std::sqrt(std::numbers::pi);
  CHECK(sobolev_norm(s, {1.5, 2.0}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(sup_norm(s) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lp_norm(s, 4.0) == doctest::Approx(std::pow(0.75 * std::numbers::pi, 0.25)).epsilon(1e-12));
}

TEST_CASE("gradient and Jacobian layout") {
  const GridSpec g(2, 16);
  std::vector<double> v(2 * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.sample_point(i);
    v[i] = std::sin(x[0]);                    // f_0 = sin(x0)
    v[g.size() + i] = std::cos(2.0 * x[1]);   // f_1 = cos(2 x1)
  }
  const auto f = SpectralField::from_values(g, 2, v);
  const auto jac = jacobian(f);
  REQUIRE(jac.components() == 4);
  const auto d00 = jac.values(0), d01 = jac.values(1), d10 = jac.values(2), d11 = jac.values(3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.sample_point(i);
    CHECK(d00[i] == doctest::Approx(std::cos(x[0])).epsilon(1e-12));
    CHECK(std::abs(d01[i]) < 1e-12);
    CHECK(std::abs(d10[i]) < 1e-12);
    CHECK(d11[i] == doctest::Approx(-2.0 * std::sin(2.0 * x[1])).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gradient(f), std::invalid_argument);
}

TEST_CASE("dyadic cutoff and mollifier multipliers") {
  const GridSpec g(1, 64);
  const auto f = random_field(g, 1, 13);
  const auto s3 = dyadic_cutoff(f, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int k = std::abs(g.signed_index(static_cast<int>(i)));
    if (k <= 8) CHECK(std::abs(s3.coeffs(0)[i] - f.coeffs(0)[i]) < 1e-15);
    if (k >= 12) CHECK(std::abs(s3.coeffs(0)[i]) == 0.0);
  }
  const auto m = mollify(f, 4);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double k = g.signed_index(static_cast<int>(i));
    CHECK(std::abs(m.coeffs(0)[i] - f.coeffs(0)[i] * std::exp(-k * k / 32.0)) < 1e-15);
  }
  CHECK_THROWS_AS(mollify(f, 0), std::invalid_argument);
  CHECK_THROWS_AS(dyadic_cutoff(f, -1), std::invalid_argument);
}

TEST_CASE("point evaluation matches direct summation") {
  std::mt19937_64 engine(17);
  std::uniform_real_distribution<double> unif(-7.0, 13.0);
  for (int d : {1, 2, 3}) {
    const GridSpec g(d, 8, 2.0 * std::numbers::pi);
    const auto f = random_field(g, 1, 19u + static_cast<unsigned>(d));
    PointEvaluator eval(f);
    for (int trial = 0; trial < 20; ++trial) {
      Point x{unif(engine), unif(engine), unif(engine)};
      double value = 0.0;
      eval.values(x, std::span(&value, 1));
      CHECK(value == doctest::Approx(oracle::direct_eval_real(g, f.coeffs(0), x)).epsilon(1e-12));
    }
    // At grid points the evaluator reproduces the samples.
    const auto samples = f.values(0);
    for (std::size_t i = 0; i < g.size(); i += 5) {
      double value = 0.0;
      eval.values(g.sample_point(i), std::span(&value, 1));
      CHECK(value == doctest::Approx(samples[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("point Jacobian matches finite differences") {
  const GridSpec g(1, 32);
  const auto f = mollify(random_field(g, 1, 23), 3);
  PointEvaluator eval(f);
  for (double x : {0.3, 1.7, 4.4, -2.0}) {
    double v = 0.0, dv = 0.0, vp = 0.0, vm = 0.0;
    eval.values_and_jacobian({x, 0, 0}, std::span(&v, 1), std::span(&dv, 1));
    const double h = 1e-5;
    eval.values({x + h, 0, 0}, std::span(&vp, 1));
    eval.values({x - h, 0, 0}, std::span(&vm, 1));
    CHECK(dv == doctest::Approx((vp - vm) / (2 * h)).epsilon(1e-7));
  }
  const GridSpec g2(2, 16);
  std::vector<double> vals(g2.size());
  for (std::size_t i = 0; i < g2.size(); ++i) {
    const auto x = g2.sample_point(i);
    vals[i] = std::sin(x[0]) * std::cos(2 * x[1]);
  }
  PointEvaluator e2(SpectralField::from_values(g2, 1, vals));
  double v = 0.0;
  std::array<double, 2> jac{};
  e2.values_and_jacobian({0.4, 1.1, 0}, std::span(&v, 1), jac);
  CHECK(v == doctest::Approx(std::sin(0.4) * std::cos(2.2)).epsilon(1e-12));
  CHECK(jac[0] == doctest::Approx(std::cos(0.4) * std::cos(2.2)).epsilon(1e-12));
  CHECK(jac[1] == doctest::Approx(-2 * std::sin(0.4) * std::sin(2.2)).epsilon(1e-12));
}

TEST_CASE("blend is a weighted sum") {
  const GridSpec g(1, 16);
  const auto a = sine(g, 1.0, 1), b = sine(g, 2.0, 3);
  PointEvaluator ea(a), eb(b);
  double v = 0.0, j = 0.0;
  PointEvaluator::blend(ea, 0.25, eb, 0.75, {0.9, 0, 0}, std::span(&v, 1), std::span(&j, 1));
  CHECK(v == doctest::Approx(0.25 * std::sin(0.9) + 1.5 * std::sin(2.7)).epsilon(1e-12));
  CHECK(j == doctest::Approx(0.25 * std::cos(0.9) + 4.5 * std::cos(2.7)).epsilon(1e-12));
}

TEST_CASE("resampling preserves band-limited fields") {
  const GridSpec g(2, 16);
  const auto f = dyadic_cutoff(random_field(g, 1, 29), 2);
  const auto up = f.resampled(32);
  const auto down = up.resampled(16);
  CHECK(max_abs_diff(down.all_coeffs(), f.all_coeffs()) < 1e-15);
  // Same function at the shared sample points.
  const auto fv = f.values(0);
  const auto uv = up.values(0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.unflatten(i);
    const std::array<int, 2> fine{2 * idx[0], 2 * idx[1]};
    CHECK(uv[up.grid().flatten(fine)] == doctest::Approx(fv[i]).epsilon(1e-12));
  }
}

TEST_CASE("time grid and time field") {
  CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(1.0, 1), std::invalid_argument);
  const TimeGrid t(2.0, 4);
  CHECK(t.step() == 0.5);
  CHECK(t.node(3) == 1.5);
  const GridSpec g(1, 8);
  auto z = TimeField::zeros(t, g, 1);
  CHECK(z.size() == 5);
  const auto s = sine(g, 1.0, 1);
  const auto c = TimeField::constant_in_time(t, s);
  const auto twice = c + c;
  CHECK(max_abs_diff(twice[2].all_coeffs(), (2.0 * s).all_coeffs()) == 0.0);
}

TEST_CASE("snapshot round trip and layout") {
  const auto dir = std::filesystem::temp_directory_path() / "sd_snapshot_test";
  std::filesystem::create_directories(dir);
  const GridSpec g(2, 8, 3.0);
  const auto f = random_field(g, 2, 31);
  const auto path = dir / "f.bin";
  snapshot::write_field(path, f, "random test field");
  const auto back = snapshot::read_field(path);
  CHECK(back.grid() == g);
  CHECK(back.is_real());
  CHECK(max_abs_diff(back.all_coeffs(), f.all_coeffs()) == 0.0);

  // Payload starts with re, im of component 0 at kappa = 0 and has 2 * 2 * 64 doubles.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes.size() == 2 * 2 * 64 * 8);
  const auto doubles = snapshot::parse_le_doubles(bytes);
  CHECK(doubles[0] == f.coeffs(0)[0].real());
  CHECK(doubles[3] == f.coeffs(0)[1].imag());
  CHECK(doubles[2 * 64] == f.coeffs(1)[0].real());

  const auto side = snapshot::read_sidecar(path);
  CHECK(side.at("d") == 2);
  CHECK(side.at("N") == 8);
  CHECK(side.at("L") == 3.0);
  CHECK(side.at("components") == 2);
  CHECK(side.at("real_flag") == true);
  CHECK(side.at("description") == "random test field");

  const TimeGrid t(1.0, 3);
  const auto tf = TimeField::constant_in_time(t, f);
  snapshot::write_time_field(dir / "tf.bin", tf, "constant");
  const auto tback = snapshot::read_time_field(dir / "tf.bin");
  CHECK(tback.time() == t);
  CHECK(max_abs_diff(tback[3].all_coeffs(), f.all_coeffs()) == 0.0);

  std::ofstream(dir / "bad.bin", std::ios::binary) << "abc";
  std::ofstream(dir / "bad.bin.json") << "{\"d\": 1, \"N\": 8, \"L\": 1, \"components\": 1, \"real_flag\": true}";
  CHECK_THROWS_AS(snapshot::read_field(dir / "bad.bin"), FormatError);
  CHECK_THROWS_AS(snapshot::read_field(dir / "missing.bin"), FormatError);
  std::filesystem::remove_all(dir);
}
