#pragma once

#include "singular_drift/spectral.hpp"

namespace singular_drift {

/// Smooth radial cutoff: 1 on [0, 1], 0 on [3/2, inf), C-infinity in between.
double cutoff_profile(double r);

struct ProductOptions {
  double tol = 1e-10;
  /// Norm in which successive iterates S^j f S^j g are compared.
  SobolevIndex idx{-0.25, 2.0};
  int start_level = 3;
  /// Return the grid-resolution iterate instead of throwing NonConvergent.
  bool accept_grid_limit = false;
};

struct ProductResult {
  SpectralField value;
  int level = 0;
  double last_increment = 0.0;
  /// False when the iterate was taken at the grid limit without the
  /// increment dropping below tol.
  bool resolved = true;
};

/// Smallest level j at which S^j acts as the identity on the lattice.
int grid_limit_level(const GridSpec& grid);

/// Exact pointwise product of two band-limited fields, computed on a 2x
/// zero-padded lattice and projected back onto the input lattice. Either
/// factor may be scalar; otherwise components multiply pairwise.
SpectralField dealiased_product(const SpectralField& f, const SpectralField& g);

/// fg := lim_j S^j f S^j g, iterating j from opts.start_level.
ProductResult regularized_product(const SpectralField& f, const SpectralField& g,
                                  const ProductOptions& opts);

/// Convenience form throwing NonConvergent when the limit is not resolved.
SpectralField product(const SpectralField& f, const SpectralField& g, double tol,
                      const SobolevIndex& idx);

struct DriftProductResult {
  SpectralField value;
  int max_level = 0;
  bool resolved = true;
};

/// Component i equals sum_j b_j (d_j u_i), each factor a regularized product.
DriftProductResult drift_gradient_product(const SpectralField& b, const SpectralField& u,
                                          const ProductOptions& opts);

/// ||fg||_{H^{-beta}_p} / (||f||_{H^delta_p} ||g||_{H^{-beta}_q}); 0 when g = 0.
double product_bound_ratio(const SpectralField& f, const SpectralField& g, double beta,
                           double delta, double p, double q);

}  // namespace singular_drift
