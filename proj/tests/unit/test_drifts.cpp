#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "singular_drift/drifts.hpp"
#include "singular_drift/errors.hpp"

using namespace singular_drift;

namespace {

DriftSpec spec_of(DriftFamily family, std::uint64_t seed = 3) {
  DriftSpec s;
  s.family = family;
  s.seed = seed;
  s.decay = critical_decay(s.beta);
  return s;
}

const TimeGrid kTime(1.0, 8);

}  // namespace

TEST_CASE("family names round trip") {
  for (auto f : {DriftFamily::RandomFourier, DriftFamily::DerivativeOfContinuous, DriftFamily::SmoothTest})
    CHECK(parse_drift_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_drift_family("brownian"), InvalidSpec);
}

TEST_CASE("spec validation and JSON") {
  DriftSpec s;
  s.beta = 0.5;
  CHECK_THROWS_AS(s.validate(), InvalidSpec);
  s.beta = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidSpec);
  s.beta = 0.3;
  s.amplitude = -1.0;
  CHECK_THROWS_AS(s.validate(), InvalidSpec);

  DriftSpec t = spec_of(DriftFamily::DerivativeOfContinuous, 99);
  t.time_dependence = {true, 3};
  t.amplitude = 0.7;
  const nlohmann::json j = t;
  const auto back = j.get<DriftSpec>();
  CHECK(back.family == t.family);
  CHECK(back.seed == 99);
  CHECK(back.time_dependence.piecewise);
  CHECK(back.time_dependence.changes == 3);
  CHECK(back.amplitude == 0.7);
  CHECK_THROWS_AS((nlohmann::json{{"time_dependence", "weekly"}}.get<DriftSpec>()), InvalidSpec);
}

TEST_CASE("random-fourier coefficients") {
  const GridSpec g(1, 64);
  const auto spec = spec_of(DriftFamily::RandomFourier);
  const auto b = generate(spec, g, kTime);
  CHECK(b.components() == 1);
  CHECK(b[0].hermitian_defect() < 1e-15);
  CHECK(std::abs(b[0].coeffs(0)[0]) == 0.0);
  for (int k = 1; k < 32; ++k)
    CHECK(std::abs(b[0].coeffs(0)[static_cast<std::size_t>(k)]) ==
          doctest::Approx(spec.amplitude * std::pow(k, -spec.decay)).epsilon(1e-12));
  // Static drift: every node identical.
  CHECK(std::equal(b[0].all_coeffs().begin(), b[0].all_coeffs().end(), b[8].all_coeffs().begin()));
}

TEST_CASE("draws nest across lattice sizes and depend on the seed") {
  for (auto family : {DriftFamily::RandomFourier, DriftFamily::DerivativeOfContinuous}) {
    const auto spec = spec_of(family);
    const auto coarse = generate(spec, GridSpec(2, 16), kTime);
    const auto fine = generate(spec, GridSpec(2, 32), kTime);
    const auto down = fine[0].resampled(16);
    for (std::size_t i = 0; i < coarse.grid().size(); ++i) {
      if (coarse.grid().is_nyquist(i)) continue;
      for (int c = 0; c < 2; ++c) CHECK(std::abs(down.coeffs(c)[i] - coarse[0].coeffs(c)[i]) < 1e-15);
    }
    const auto other = generate(spec_of(family, 4), GridSpec(2, 16), kTime);
    CHECK(std::abs(other[0].coeffs(0)[17] - coarse[0].coeffs(0)[17]) > 1e-6);
  }
}

TEST_CASE("derivative-of-continuous is a gradient") {
  const GridSpec g(2, 16);
  const auto b = generate(spec_of(DriftFamily::DerivativeOfContinuous), g, kTime);
  // Curl-free: i kappa_0 b_1 == i kappa_1 b_0 mode by mode.
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = g.wavevector(i);
    CHECK(std::abs(k[0] * b[0].coeffs(1)[i] - k[1] * b[0].coeffs(0)[i]) < 1e-14);
  }
}

TEST_CASE("smooth-test drift is amplitude * sin") {
  const GridSpec g(1, 32);
  auto spec = spec_of(DriftFamily::SmoothTest);
  spec.amplitude = 0.2;
  const auto b = generate(spec, g, kTime);
  const auto v = b[3].values(0);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(v[i] == doctest::Approx(0.2 * std::sin(g.sample_point(i)[0])).epsilon(1e-13));
  spec.bandwidth = 4;
  const auto wide = generate(spec, g, kTime);
  CHECK(std::abs(wide[0].coeffs(0)[3]) == doctest::Approx(0.2 * std::pow(3.0, -spec.decay)).epsilon(1e-12));
  CHECK(std::abs(wide[0].coeffs(0)[5]) == 0.0);
}

TEST_CASE("piecewise-constant time dependence") {
  const GridSpec g(1, 16);
  auto spec = spec_of(DriftFamily::RandomFourier);
  spec.time_dependence = {true, 1};
  const auto b = generate(spec, g, kTime);
  auto same = [&](int m, int n) {
    return std::equal(b[m].all_coeffs().begin(), b[m].all_coeffs().end(), b[n].all_coeffs().begin());
  };
  CHECK(same(0, 3));
  CHECK_FALSE(same(3, 4));
  CHECK(same(4, 8));
}

TEST_CASE("assumption check") {
  const GridSpec g(1, 128);
  const auto b = generate(spec_of(DriftFamily::RandomFourier), g, kTime);
  CHECK_THROWS_AS(assumption_check(b, 0.25, 1.2), AssumptionViolated);  // q below d/(1-beta)
  CHECK_THROWS_AS(assumption_check(b, 0.25, 4.5), AssumptionViolated);  // q above d/beta
  CHECK_THROWS_AS(assumption_check(b, 0.6, 3.0), AssumptionViolated);
  const auto r = assumption_check(b, 0.25, 3.0);
  CHECK(r.finite);
  CHECK(r.q_tilde == doctest::Approx(4.0 / 3.0));
  CHECK(r.norm == doctest::Approx(drift_norm(b, 0.25, 3.0)));
  CHECK(r.norm > 0.0);
  CHECK(r.refined_norm > 0.0);
  CHECK(r.relative_change < 0.05);
}

TEST_CASE("kappa region") {
  const KappaRegion region{0.25, 3.0, 1};
  const auto k = pick_kappa(region, 1);
  CHECK(region.contains(k));
  CHECK(k.delta == 0.5);
  CHECK(k.p == doctest::Approx(2.5));
  CHECK_FALSE(region.contains({0.2, 2.5}));
  CHECK_FALSE(region.contains({0.5, 1.9}));
  CHECK_THROWS_AS(pick_kappa({0.45, 3.62, 2}, 2), EmptyRegion);
}

TEST_CASE("mollified sequence") {
  const GridSpec g(1, 64);
  const auto b = generate(spec_of(DriftFamily::RandomFourier), g, kTime);
  const std::vector<int> levels{2, 8, 32};
  const auto seq = mollified_sequence(b, levels);
  REQUIRE(seq.size() == 3);
  double prev = drift_norm(seq[0], 0.25, 3.0);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double cur = drift_norm(seq[i], 0.25, 3.0);
    CHECK(cur > prev);
    prev = cur;
  }
  const std::vector<int> bad{4, 4};
  CHECK_THROWS_AS(mollified_sequence(b, bad), std::invalid_argument);
}
