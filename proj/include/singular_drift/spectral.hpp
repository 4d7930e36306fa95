#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace singular_drift {

using Complex = std::complex<double>;

inline constexpr int kMaxDim = 3;

/// A point of R^d; entries past the grid dimension are ignored.
using Point = std::array<double, kMaxDim>;

/// Periodic lattice [0, L)^d sampled with N points per axis.
///
/// Wavevectors are kappa = 2*pi*k/L for k in {-N/2, ..., N/2-1}^d, stored in
/// FFT order (k = 0, 1, ..., N/2-1, -N/2, ..., -1) with the last axis fastest.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(int dim, int modes, double period = 2.0 * std::numbers::pi);

  int dim() const { return dim_; }
  int modes() const { return modes_; }
  double period() const { return period_; }
  double spacing() const { return period_ / modes_; }
  std::size_t size() const { return size_; }
  double cell_volume() const;
  double domain_volume() const;

  /// Signed lattice index of FFT position i along one axis.
  int signed_index(int i) const { return i < modes_ / 2 ? i : i - modes_; }
  double axis_wavenumber(int i) const;

  /// Multi-index of a flat position; unused trailing axes are zero.
  std::array<int, kMaxDim> unflatten(std::size_t flat) const;
  std::size_t flatten(std::span<const int> indices) const;

  /// Flat position of the lattice point -k (used for Hermitian partners).
  std::size_t mirror(std::size_t flat) const;

  std::array<double, kMaxDim> wavevector(std::size_t flat) const;
  double wavevector_norm2(std::size_t flat) const;

  /// True when any axis sits on the unpaired index -N/2.
  bool is_nyquist(std::size_t flat) const;

  /// Largest |kappa| on the lattice.
  double max_wavenumber() const;

  /// Grid coordinate of a sample point.
  Point sample_point(std::size_t flat) const;

  GridSpec refined() const { return GridSpec(dim_, 2 * modes_, period_); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int dim_ = 1;
  int modes_ = 8;
  double period_ = 2.0 * std::numbers::pi;
  std::size_t size_ = 8;
};

/// Selects the norm ||A^{s/2} f||_{L^p} with A = I - Laplacian/2.
struct SobolevIndex {
  double s = 0.0;
  double p = 2.0;

  SobolevIndex() = default;
  SobolevIndex(double order, double integrability);
};

/// Fourier coefficients c_kappa of f(x) = sum_kappa c_kappa exp(i kappa.x),
/// one block of grid().size() coefficients per component. Used for functions
/// and for distributions of negative order alike.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(GridSpec grid, int components, bool real = true);

  static SpectralField from_values(const GridSpec& grid, int components,
                                   std::span<const double> values);
  static SpectralField from_complex_values(const GridSpec& grid, int components,
                                           std::span<const Complex> values);
  static SpectralField constant(const GridSpec& grid, std::span<const double> value);
  static SpectralField from_coefficients(const GridSpec& grid, int components, bool real,
                                         std::vector<Complex> coeffs);

  const GridSpec& grid() const { return grid_; }
  int components() const { return components_; }
  bool is_real() const { return real_; }

  std::span<const Complex> coeffs(int component) const;
  std::span<Complex> coeffs(int component);
  std::span<const Complex> all_coeffs() const { return coeffs_; }
  std::span<Complex> all_coeffs() { return coeffs_; }

  /// Grid values of one component (real part for real fields).
  std::vector<double> values(int component) const;
  std::vector<Complex> complex_values(int component) const;

  SpectralField component(int c) const;
  static SpectralField stack(std::span<const SpectralField> scalars);

  /// Largest |c(-k) - conj(c(k))| over the stored lattice.
  double hermitian_defect() const;

  /// The same band-limited function represented on another lattice size
  /// (zero padding or truncation of the coefficient set).
  SpectralField resampled(int modes) const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double scale);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

 private:
  GridSpec grid_;
  int components_ = 0;
  bool real_ = true;
  std::vector<Complex> coeffs_;
};

/// Symbol of A = I - Laplacian/2 at a lattice point: 1 + |kappa|^2 / 2.
double bessel_symbol(const GridSpec& grid, std::size_t flat);

/// Multiply every coefficient by m(|kappa|^2). `symbol` receives |kappa|^2.
template <typename Symbol>
SpectralField apply_multiplier(const SpectralField& f, Symbol&& symbol) {
  SpectralField out = f;
  const auto& grid = f.grid();
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    const double factor = symbol(grid.wavevector_norm2(flat));
    for (int c = 0; c < f.components(); ++c) out.coeffs(c)[flat] *= factor;
  }
  return out;
}

/// A^{s/2} f.
SpectralField bessel_power(const SpectralField& f, double s);

/// Rectangle-rule L^p norm of |A^{s/2} f| (Euclidean magnitude over components).
double sobolev_norm(const SpectralField& f, const SobolevIndex& idx);

/// Exact p = 2 value via Parseval: sqrt(L^d sum a_kappa^s |c_kappa|^2).
double sobolev_norm_parseval(const SpectralField& f, double s);

/// Grid L^p norm of the pointwise Euclidean magnitude of the field values.
double lp_norm(const SpectralField& f, double p);

/// Largest pointwise Euclidean magnitude on the grid.
double sup_norm(const SpectralField& f);

/// Heat semigroup generated by Laplacian/2 - I.
SpectralField heat_semigroup(const SpectralField& f, double t);

/// Gradient of a scalar field; component j multiplies by i kappa_j.
SpectralField gradient(const SpectralField& scalar);

/// Jacobian of a vector field, flattened as component i*d + j = d_j f_i.
SpectralField jacobian(const SpectralField& field);

/// Littlewood-Paley low-pass S^j: multiply by the cutoff profile at |kappa|/2^j.
SpectralField dyadic_cutoff(const SpectralField& f, int level);

/// Gaussian mollifier of width 1/n.
SpectralField mollify(const SpectralField& f, int n);

/// Direct Fourier summation at a point, one entry per component.
std::vector<double> evaluate(const SpectralField& f, const Point& x);

/// Precomputed evaluation of a field and its gradient at arbitrary points.
///
/// For real 1-d fields only the non-negative half of the spectrum is kept and
/// powers of exp(i x) are generated by recurrence.
class PointEvaluator {
 public:
  PointEvaluator() = default;
  explicit PointEvaluator(const SpectralField& f);

  int dim() const { return dim_; }
  int components() const { return components_; }

  /// Values of every component at x, written to `values` (size components()).
  void values(const Point& x, std::span<double> values) const;

  /// Values and the Jacobian (row-major, components() x dim()).
  void values_and_jacobian(const Point& x, std::span<double> values,
                           std::span<double> jacobian) const;

  /// Weighted sum w0*f0(x) + w1*f1(x) of two evaluators on the same grid.
  static void blend(const PointEvaluator& f0, double w0, const PointEvaluator& f1, double w1,
                    const Point& x, std::span<double> values, std::span<double> jacobian);

 private:
  void accumulate(const Point& x, double weight, std::span<double> values,
                  std::span<double> jacobian) const;

  GridSpec grid_;
  int dim_ = 1;
  int components_ = 0;
  bool real_ = true;
  bool half_spectrum_ = false;
  double base_wavenumber_ = 1.0;
  // Half spectrum (1-d real): k = 0..N/2 with the Nyquist term last.
  std::vector<Complex> coeffs_;
};

}  // namespace singular_drift
