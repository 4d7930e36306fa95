#include "singular_drift/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "singular_drift/parallel.hpp"
#include "singular_drift/rng.hpp"

namespace singular_drift {
namespace {

std::vector<double> sorted(std::span<const double> a) {
  std::vector<double> out(a.begin(), a.end());
  std::sort(out.begin(), out.end());
  return out;
}

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("samples must be non-empty");
}

}  // namespace

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto sa = sorted(a);
  const auto sb = sorted(b);
  if (sa.size() == sb.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) sum += std::abs(sa[i] - sb[i]);
    return sum / static_cast<double>(sa.size());
  }
  // Integrate |F_a - F_b| over the merged breakpoints.
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double x = std::min(sa.front(), sb.front());
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double next = (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
  }
  return total;
}

double ks_stat(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto sa = sorted(a);
  const auto sb = sorted(b);
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double x = (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return worst;
}

double mean(std::span<const double> a) {
  if (a.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("covariance needs two equal samples of size >= 2");
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

double variance(std::span<const double> a) { return covariance(a, a); }

double moment_distance(std::span<const double> a, std::span<const double> b) {
  return std::abs(mean(a) - mean(b)) + std::abs(std::sqrt(variance(a)) - std::sqrt(variance(b)));
}

namespace {

double kendall_tau_index(std::span<const double> y) {
  const std::size_t n = y.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (y[j] > y[i]) s += 1.0;
      if (y[j] < y[i]) s -= 1.0;
    }
  return s / (0.5 * static_cast<double>(n * (n - 1)));
}

}  // namespace

KendallResult kendall_trend(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("trend test needs at least 2 points");
  KendallResult out;
  out.tau = kendall_tau_index(y);
  const std::size_t n = y.size();
  if (n <= 10) {
    std::vector<double> perm(n);
    std::iota(perm.begin(), perm.end(), 0.0);
    long long hits = 0, total = 0;
    do {
      if (kendall_tau_index(perm) <= out.tau + 1e-12) ++hits;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p_decreasing = static_cast<double>(hits) / static_cast<double>(total);
    out.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double sd = std::sqrt(2.0 * (2.0 * nn + 5.0) / (9.0 * nn * (nn - 1.0)));
    out.p_decreasing = 0.5 * std::erfc(-out.tau / sd / std::sqrt(2.0));
    out.exact = false;
  }
  return out;
}

Interval paired_bootstrap(std::span<const double> a, std::span<const double> b, const TwoSampleStatistic& stat,
                          int resamples, std::uint64_t seed, double level) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("paired bootstrap needs equal non-empty samples");
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) throw std::invalid_argument("invalid bootstrap settings");
  const std::size_t n = a.size();
  std::vector<std::size_t> order_a(n), order_b(n);
  std::iota(order_a.begin(), order_a.end(), 0);
  std::iota(order_b.begin(), order_b.end(), 0);
  std::sort(order_a.begin(), order_a.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
  std::sort(order_b.begin(), order_b.end(), [&](std::size_t i, std::size_t j) { return b[i] < b[j]; });

  const CounterRng rng(mix64(seed));
  std::vector<double> values(static_cast<std::size_t>(resamples));
  parallel_for(values.size(), [&](std::size_t r) {
    std::vector<std::uint32_t> counts(n, 0);
    for (std::size_t i = 0; i < n; i += 2) {
      const auto u = rng.uniforms({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i), 0u, 0u});
      counts[std::min(n - 1, static_cast<std::size_t>(u[0] * static_cast<double>(n)))]++;
      if (i + 1 < n) counts[std::min(n - 1, static_cast<std::size_t>(u[1] * static_cast<double>(n)))]++;
    }
    // Expanding counts in sorted order yields already sorted resamples.
    std::vector<double> ra, rb;
    ra.reserve(n);
    rb.reserve(n);
    for (std::size_t i : order_a) ra.insert(ra.end(), counts[i], a[i]);
    for (std::size_t i : order_b) rb.insert(rb.end(), counts[i], b[i]);
    values[r] = stat(ra, rb);
  });
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(values.size() - 1, lo + 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {stat(a, b), quantile(0.5 * (1.0 - level)), quantile(0.5 * (1.0 + level))};
}

double split_floor(std::span<const double> a, const TwoSampleStatistic& stat) {
  if (a.size() < 2) throw std::invalid_argument("split floor needs at least 2 samples");
  const std::size_t half = a.size() / 2;
  return stat(a.first(half), a.subspan(half, half));
}

}  // namespace singular_drift
