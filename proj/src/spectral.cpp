#include "singular_drift/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "singular_drift/fft.hpp"
#include "singular_drift/paraproduct.hpp"
#include "singular_drift/time_field.hpp"

namespace singular_drift {
namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void require_same_layout(const SpectralField& a, const SpectralField& b) {
  if (!(a.grid() == b.grid()) || a.components() != b.components())
    throw std::invalid_argument("spectral field layout mismatch");
}

double reduce_mod(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  return r;
}

}  // namespace

GridSpec::GridSpec(int dim, int modes, double period) : dim_(dim), modes_(modes), period_(period) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("grid dimension must be 1..3");
  if (modes < 8 || !is_power_of_two(modes))
    throw std::invalid_argument("modes per axis must be a power of two >= 8");
  if (!(period > 0.0)) throw std::invalid_argument("period must be positive");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(modes);
}

double GridSpec::cell_volume() const { return std::pow(spacing(), dim_); }
double GridSpec::domain_volume() const { return std::pow(period_, dim_); }

double GridSpec::axis_wavenumber(int i) const {
  return 2.0 * std::numbers::pi * signed_index(i) / period_;
}

std::array<int, kMaxDim> GridSpec::unflatten(std::size_t flat) const {
  std::array<int, kMaxDim> idx{};
  for (int a = dim_ - 1; a >= 0; --a) {
    idx[static_cast<std::size_t>(a)] = static_cast<int>(flat % static_cast<std::size_t>(modes_));
    flat /= static_cast<std::size_t>(modes_);
  }
  return idx;
}

std::size_t GridSpec::flatten(std::span<const int> indices) const {
  std::size_t flat = 0;
  for (int a = 0; a < dim_; ++a)
    flat = flat * static_cast<std::size_t>(modes_) + static_cast<std::size_t>(indices[static_cast<std::size_t>(a)]);
  return flat;
}

std::size_t GridSpec::mirror(std::size_t flat) const {
  auto idx = unflatten(flat);
  for (int a = 0; a < dim_; ++a) {
    auto& i = idx[static_cast<std::size_t>(a)];
    i = (modes_ - i) % modes_;
  }
  return flatten(idx);
}

std::array<double, kMaxDim> GridSpec::wavevector(std::size_t flat) const {
  const auto idx = unflatten(flat);
  std::array<double, kMaxDim> k{};
  for (int a = 0; a < dim_; ++a) k[static_cast<std::size_t>(a)] = axis_wavenumber(idx[static_cast<std::size_t>(a)]);
  return k;
}

double GridSpec::wavevector_norm2(std::size_t flat) const {
  const auto k = wavevector(flat);
  double s = 0.0;
  for (int a = 0; a < dim_; ++a) s += k[static_cast<std::size_t>(a)] * k[static_cast<std::size_t>(a)];
  return s;
}

bool GridSpec::is_nyquist(std::size_t flat) const {
  const auto idx = unflatten(flat);
  for (int a = 0; a < dim_; ++a)
    if (idx[static_cast<std::size_t>(a)] == modes_ / 2) return true;
  return false;
}

double GridSpec::max_wavenumber() const {
  return std::sqrt(static_cast<double>(dim_)) * (modes_ / 2) * 2.0 * std::numbers::pi / period_;
}

Point GridSpec::sample_point(std::size_t flat) const {
  const auto idx = unflatten(flat);
  Point x{};
  for (int a = 0; a < dim_; ++a) x[static_cast<std::size_t>(a)] = idx[static_cast<std::size_t>(a)] * spacing();
  return x;
}

SobolevIndex::SobolevIndex(double order, double integrability) : s(order), p(integrability) {
  if (!(integrability > 1.0)) throw std::invalid_argument("Sobolev integrability p must exceed 1");
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(GridSpec grid, int components, bool real)
    : grid_(grid), components_(components), real_(real) {
  if (components < 1) throw std::invalid_argument("a field needs at least one component");
  coeffs_.assign(grid_.size() * static_cast<std::size_t>(components), Complex{});
}

SpectralField SpectralField::from_values(const GridSpec& grid, int components,
                                         std::span<const double> values) {
  if (values.size() != grid.size() * static_cast<std::size_t>(components))
    throw std::invalid_argument("value array does not match the grid");
  std::vector<Complex> buffer(values.begin(), values.end());
  SpectralField f(grid, components, true);
  const double norm = 1.0 / static_cast<double>(grid.size());
  for (int c = 0; c < components; ++c) {
    auto block = std::span<Complex>(buffer).subspan(static_cast<std::size_t>(c) * grid.size(), grid.size());
    fft::forward(grid.dim(), grid.modes(), block, f.coeffs(c));
    for (auto& z : f.coeffs(c)) z *= norm;
  }
  return f;
}

SpectralField SpectralField::from_complex_values(const GridSpec& grid, int components,
                                                 std::span<const Complex> values) {
  if (values.size() != grid.size() * static_cast<std::size_t>(components))
    throw std::invalid_argument("value array does not match the grid");
  SpectralField f(grid, components, false);
  const double norm = 1.0 / static_cast<double>(grid.size());
  for (int c = 0; c < components; ++c) {
    fft::forward(grid.dim(), grid.modes(), values.subspan(static_cast<std::size_t>(c) * grid.size(), grid.size()),
                 f.coeffs(c));
    for (auto& z : f.coeffs(c)) z *= norm;
  }
  return f;
}

SpectralField SpectralField::constant(const GridSpec& grid, std::span<const double> value) {
  SpectralField f(grid, static_cast<int>(value.size()), true);
  for (int c = 0; c < f.components(); ++c) f.coeffs(c)[0] = value[static_cast<std::size_t>(c)];
  return f;
}

SpectralField SpectralField::from_coefficients(const GridSpec& grid, int components, bool real,
                                               std::vector<Complex> coeffs) {
  SpectralField f(grid, components, real);
  if (coeffs.size() != f.coeffs_.size()) throw std::invalid_argument("coefficient array does not match the grid");
  f.coeffs_ = std::move(coeffs);
  return f;
}

std::span<const Complex> SpectralField::coeffs(int component) const {
  return std::span<const Complex>(coeffs_).subspan(static_cast<std::size_t>(component) * grid_.size(), grid_.size());
}

std::span<Complex> SpectralField::coeffs(int component) {
  return std::span<Complex>(coeffs_).subspan(static_cast<std::size_t>(component) * grid_.size(), grid_.size());
}

std::vector<Complex> SpectralField::complex_values(int component) const {
  std::vector<Complex> out(grid_.size());
  fft::backward(grid_.dim(), grid_.modes(), coeffs(component), out);
  return out;
}

std::vector<double> SpectralField::values(int component) const {
  const auto z = complex_values(component);
  std::vector<double> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](Complex w) { return w.real(); });
  return out;
}

SpectralField SpectralField::component(int c) const {
  SpectralField out(grid_, 1, real_);
  std::copy(coeffs(c).begin(), coeffs(c).end(), out.coeffs(0).begin());
  return out;
}

SpectralField SpectralField::stack(std::span<const SpectralField> scalars) {
  if (scalars.empty()) throw std::invalid_argument("cannot stack zero fields");
  int total = 0;
  bool real = true;
  for (const auto& s : scalars) {
    if (!(s.grid() == scalars.front().grid())) throw std::invalid_argument("stack: grid mismatch");
    total += s.components();
    real = real && s.is_real();
  }
  SpectralField out(scalars.front().grid(), total, real);
  int c = 0;
  for (const auto& s : scalars)
    for (int k = 0; k < s.components(); ++k, ++c) std::copy(s.coeffs(k).begin(), s.coeffs(k).end(), out.coeffs(c).begin());
  return out;
}

double SpectralField::hermitian_defect() const {
  double worst = 0.0;
  for (int c = 0; c < components_; ++c) {
    const auto block = coeffs(c);
    for (std::size_t flat = 0; flat < grid_.size(); ++flat)
      worst = std::max(worst, std::abs(block[grid_.mirror(flat)] - std::conj(block[flat])));
  }
  return worst;
}

SpectralField SpectralField::resampled(int modes) const {
  const GridSpec target(grid_.dim(), modes, grid_.period());
  SpectralField out(target, components_, real_);
  const int n = grid_.modes();
  for (std::size_t flat = 0; flat < grid_.size(); ++flat) {
    const auto idx = grid_.unflatten(flat);
    // Each source index maps to one target index, except an upsampled Nyquist
    // index which is split evenly between +N/2 and -N/2.
    std::array<std::array<int, 2>, kMaxDim> choices{};
    std::array<int, kMaxDim> counts{};
    bool keep = true;
    for (int a = 0; a < grid_.dim(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const int k = grid_.signed_index(idx[ua]);
      if (modes > n && idx[ua] == n / 2) {
        choices[ua] = {(modes - n / 2) % modes, n / 2};
        counts[ua] = 2;
      } else if (k >= -modes / 2 && k < modes / 2) {
        choices[ua] = {(k + modes) % modes, 0};
        counts[ua] = 1;
      } else {
        keep = false;
      }
    }
    if (!keep) continue;
    int combos = 1;
    for (int a = 0; a < grid_.dim(); ++a) combos *= counts[static_cast<std::size_t>(a)];
    for (int combo = 0; combo < combos; ++combo) {
      std::array<int, kMaxDim> t{};
      double weight = 1.0;
      int rest = combo;
      for (int a = 0; a < grid_.dim(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const int pick = rest % counts[ua];
        rest /= counts[ua];
        t[ua] = choices[ua][static_cast<std::size_t>(pick)];
        if (counts[ua] == 2) weight *= 0.5;
      }
      const std::size_t tf = target.flatten(t);
      for (int c = 0; c < components_; ++c) out.coeffs(c)[tf] += weight * coeffs(c)[flat];
    }
  }
  if (real_ && modes < n) {
    for (std::size_t flat = 0; flat < target.size(); ++flat)
      if (target.is_nyquist(flat))
        for (int c = 0; c < components_; ++c) out.coeffs(c)[flat] = 0.0;
  }
  return out;
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  real_ = real_ && other.real_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  real_ = real_ && other.real_;
  return *this;
}

SpectralField& SpectralField::operator*=(double scale) {
  for (auto& z : coeffs_) z *= scale;
  return *this;
}

// ---------------------------------------------------------------------------

double bessel_symbol(const GridSpec& grid, std::size_t flat) {
  return 1.0 + 0.5 * grid.wavevector_norm2(flat);
}

SpectralField bessel_power(const SpectralField& f, double s) {
  if (s == 0.0) return f;
  return apply_multiplier(f, [s](double k2) { return std::pow(1.0 + 0.5 * k2, 0.5 * s); });
}

double lp_norm(const SpectralField& f, double p) {
  const auto& grid = f.grid();
  std::vector<double> magnitude2(grid.size(), 0.0);
  for (int c = 0; c < f.components(); ++c) {
    const auto z = f.complex_values(c);
    for (std::size_t i = 0; i < z.size(); ++i) magnitude2[i] += std::norm(z[i]);
  }
  double sum = 0.0;
  if (p == 2.0) {
    for (double m2 : magnitude2) sum += m2;
  } else {
    for (double m2 : magnitude2) sum += std::pow(m2, 0.5 * p);
  }
  return std::pow(sum * grid.cell_volume(), 1.0 / p);
}

double sup_norm(const SpectralField& f) {
  const auto& grid = f.grid();
  std::vector<double> magnitude2(grid.size(), 0.0);
  for (int c = 0; c < f.components(); ++c) {
    const auto z = f.complex_values(c);
    for (std::size_t i = 0; i < z.size(); ++i) magnitude2[i] += std::norm(z[i]);
  }
  return std::sqrt(*std::max_element(magnitude2.begin(), magnitude2.end()));
}

double sobolev_norm(const SpectralField& f, const SobolevIndex& idx) {
  return lp_norm(bessel_power(f, idx.s), idx.p);
}

double sobolev_norm_parseval(const SpectralField& f, double s) {
  const auto& grid = f.grid();
  double sum = 0.0;
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    const double weight = std::pow(bessel_symbol(grid, flat), s);
    for (int c = 0; c < f.components(); ++c) sum += weight * std::norm(f.coeffs(c)[flat]);
  }
  return std::sqrt(grid.domain_volume() * sum);
}

SpectralField heat_semigroup(const SpectralField& f, double t) {
  if (t < 0.0) throw std::invalid_argument("heat semigroup needs t >= 0");
  if (t == 0.0) return f;
  return apply_multiplier(f, [t](double k2) { return std::exp(-t * (1.0 + 0.5 * k2)); });
}

SpectralField gradient(const SpectralField& scalar) {
  if (scalar.components() != 1) throw std::invalid_argument("gradient expects a scalar field");
  const auto& grid = scalar.grid();
  SpectralField out(grid, grid.dim(), scalar.is_real());
  const auto in = scalar.coeffs(0);
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    if (scalar.is_real() && grid.is_nyquist(flat)) continue;
    const auto k = grid.wavevector(flat);
    for (int j = 0; j < grid.dim(); ++j) out.coeffs(j)[flat] = Complex(0.0, k[static_cast<std::size_t>(j)]) * in[flat];
  }
  return out;
}

SpectralField jacobian(const SpectralField& field) {
  std::vector<SpectralField> rows;
  rows.reserve(static_cast<std::size_t>(field.components()));
  for (int i = 0; i < field.components(); ++i) rows.push_back(gradient(field.component(i)));
  return SpectralField::stack(rows);
}

SpectralField dyadic_cutoff(const SpectralField& f, int level) {
  if (level < 0) throw std::invalid_argument("dyadic level must be >= 0");
  const double scale = std::ldexp(1.0, level);
  return apply_multiplier(f, [scale](double k2) { return cutoff_profile(std::sqrt(k2) / scale); });
}

SpectralField mollify(const SpectralField& f, int n) {
  if (n < 1) throw std::invalid_argument("mollifier index must be >= 1");
  const double inv = 1.0 / (2.0 * static_cast<double>(n) * n);
  return apply_multiplier(f, [inv](double k2) { return std::exp(-k2 * inv); });
}

std::vector<double> evaluate(const SpectralField& f, const Point& x) {
  PointEvaluator eval(f);
  std::vector<double> out(static_cast<std::size_t>(f.components()));
  eval.values(x, out);
  return out;
}

// ---------------------------------------------------------------------------

PointEvaluator::PointEvaluator(const SpectralField& f)
    : grid_(f.grid()), dim_(f.grid().dim()), components_(f.components()), real_(f.is_real()) {
  base_wavenumber_ = 2.0 * std::numbers::pi / grid_.period();
  const int n = grid_.modes();
  half_spectrum_ = real_ && dim_ == 1;
  if (half_spectrum_) {
    const auto half = static_cast<std::size_t>(n / 2 + 1);
    coeffs_.assign(half * static_cast<std::size_t>(components_), Complex{});
    for (int c = 0; c < components_; ++c) {
      const auto src = f.coeffs(c);
      auto* dst = coeffs_.data() + static_cast<std::size_t>(c) * half;
      dst[0] = src[0];
      for (int k = 1; k < n / 2; ++k) dst[k] = 2.0 * src[static_cast<std::size_t>(k)];
      dst[n / 2] = src[static_cast<std::size_t>(n / 2)];
    }
  } else {
    coeffs_.assign(f.all_coeffs().begin(), f.all_coeffs().end());
  }
}

void PointEvaluator::values(const Point& x, std::span<double> values) const {
  std::fill(values.begin(), values.end(), 0.0);
  accumulate(x, 1.0, values, {});
}

void PointEvaluator::values_and_jacobian(const Point& x, std::span<double> values,
                                         std::span<double> jacobian) const {
  std::fill(values.begin(), values.end(), 0.0);
  std::fill(jacobian.begin(), jacobian.end(), 0.0);
  accumulate(x, 1.0, values, jacobian);
}

void PointEvaluator::blend(const PointEvaluator& f0, double w0, const PointEvaluator& f1, double w1,
                           const Point& x, std::span<double> values, std::span<double> jacobian) {
  std::fill(values.begin(), values.end(), 0.0);
  std::fill(jacobian.begin(), jacobian.end(), 0.0);
  if (w0 != 0.0) f0.accumulate(x, w0, values, jacobian);
  if (w1 != 0.0) f1.accumulate(x, w1, values, jacobian);
}

void PointEvaluator::accumulate(const Point& x, double weight, std::span<double> values,
                                std::span<double> jacobian) const {
  const int n = grid_.modes();
  const double period = grid_.period();
  const bool want_jacobian = !jacobian.empty();

  if (half_spectrum_) {
    const double xr = reduce_mod(x[0], period);
    const Complex z = std::polar(1.0, base_wavenumber_ * xr);
    const auto half = static_cast<std::size_t>(n / 2 + 1);
    for (int c = 0; c < components_; ++c) {
      const Complex* cf = coeffs_.data() + static_cast<std::size_t>(c) * half;
      double value = cf[0].real();
      double deriv = 0.0;
      Complex w(1.0, 0.0);
      for (int k = 1; k < n / 2; ++k) {
        w *= z;
        const double re = cf[k].real() * w.real() - cf[k].imag() * w.imag();
        value += re;
        if (want_jacobian) {
          const double im = cf[k].real() * w.imag() + cf[k].imag() * w.real();
          deriv -= k * im;
        }
      }
      // Nyquist term read as c cos(N x / 2), matching the grid samples.
      const Complex wn = std::conj(w * z);
      const Complex ny = cf[n / 2];
      value += (ny * wn).real();
      if (want_jacobian) deriv += -(-n / 2) * (ny * wn).imag();
      values[static_cast<std::size_t>(c)] += weight * value;
      if (want_jacobian) jacobian[static_cast<std::size_t>(c)] += weight * base_wavenumber_ * deriv;
    }
    return;
  }

  // General lattice sum with per-axis phase tables.
  std::array<std::vector<Complex>, kMaxDim> phases;
  for (int a = 0; a < dim_; ++a) {
    auto& table = phases[static_cast<std::size_t>(a)];
    table.resize(static_cast<std::size_t>(n));
    const double xa = reduce_mod(x[static_cast<std::size_t>(a)], period);
    const Complex step = std::polar(1.0, base_wavenumber_ * xa);
    Complex up(1.0, 0.0), down(1.0, 0.0);
    table[0] = up;
    for (int k = 1; k < n / 2; ++k) {
      up *= step;
      down *= std::conj(step);
      table[static_cast<std::size_t>(k)] = up;
      table[static_cast<std::size_t>(n - k)] = down;
    }
    table[static_cast<std::size_t>(n / 2)] = down * std::conj(step);
  }
  for (int c = 0; c < components_; ++c) {
    const Complex* cf = coeffs_.data() + static_cast<std::size_t>(c) * grid_.size();
    Complex value{};
    std::array<Complex, kMaxDim> deriv{};
    for (std::size_t flat = 0; flat < grid_.size(); ++flat) {
      if (cf[flat] == Complex{}) continue;
      const auto idx = grid_.unflatten(flat);
      Complex term = cf[flat];
      for (int a = 0; a < dim_; ++a) term *= phases[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
      value += term;
      if (want_jacobian)
        for (int a = 0; a < dim_; ++a)
          deriv[static_cast<std::size_t>(a)] += Complex(0.0, grid_.axis_wavenumber(idx[static_cast<std::size_t>(a)])) * term;
    }
    values[static_cast<std::size_t>(c)] += weight * value.real();
    if (want_jacobian)
      for (int a = 0; a < dim_; ++a)
        jacobian[static_cast<std::size_t>(c * dim_ + a)] += weight * deriv[static_cast<std::size_t>(a)].real();
  }
}

// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double horizon, int intervals) : horizon_(horizon), intervals_(intervals) {
  if (!(horizon > 0.0)) throw std::invalid_argument("time horizon must be positive");
  if (intervals < 2) throw std::invalid_argument("time grid needs at least two intervals");
}

TimeField::TimeField(TimeGrid time, std::vector<SpectralField> nodes)
    : time_(time), nodes_(std::move(nodes)) {
  if (static_cast<int>(nodes_.size()) != time_.nodes())
    throw std::invalid_argument("time field node count does not match the time grid");
  for (const auto& n : nodes_)
    if (!(n.grid() == nodes_.front().grid()) || n.components() != nodes_.front().components())
      throw std::invalid_argument("time field nodes must share one lattice");
}

TimeField TimeField::zeros(const TimeGrid& time, const GridSpec& grid, int components) {
  return TimeField(time, std::vector<SpectralField>(static_cast<std::size_t>(time.nodes()),
                                                    SpectralField(grid, components, true)));
}

TimeField TimeField::constant_in_time(const TimeGrid& time, const SpectralField& field) {
  return TimeField(time, std::vector<SpectralField>(static_cast<std::size_t>(time.nodes()), field));
}

TimeField& TimeField::operator+=(const TimeField& other) {
  if (!(time_ == other.time_)) throw std::invalid_argument("time grid mismatch");
  for (std::size_t m = 0; m < nodes_.size(); ++m) nodes_[m] += other.nodes_[m];
  return *this;
}

TimeField& TimeField::operator-=(const TimeField& other) {
  if (!(time_ == other.time_)) throw std::invalid_argument("time grid mismatch");
  for (std::size_t m = 0; m < nodes_.size(); ++m) nodes_[m] -= other.nodes_[m];
  return *this;
}

TimeField& TimeField::operator*=(double scale) {
  for (auto& n : nodes_) n *= scale;
  return *this;
}

}  // namespace singular_drift
