#pragma once

#include <complex>
#include <span>

namespace singular_drift::fft {

using Complex = std::complex<double>;

/// Unnormalized forward transform (sign -1) over a cube of `modes`^`dim`
/// points stored row-major. In-place when in and out alias.
void forward(int dim, int modes, std::span<const Complex> in, std::span<Complex> out);

/// Unnormalized backward transform (sign +1).
void backward(int dim, int modes, std::span<const Complex> in, std::span<Complex> out);

}  // namespace singular_drift::fft
