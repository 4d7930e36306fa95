#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace singular_drift {

/// Counter-based generator (Philox4x32-10). Every draw is a pure function of
/// (key, counter), so streams can be addressed by (seed, path, step) without
/// any sequential state.
class CounterRng {
 public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit CounterRng(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Counter block(Counter counter) const;

  /// Two uniforms in (0, 1) with 53 random bits each.
  std::array<double, 2> uniforms(const Counter& counter) const;

  /// Two independent standard normals (Box-Muller on uniforms()).
  std::array<double, 2> normals(const Counter& counter) const;

  static constexpr std::string_view kDescription = "philox4x32-10, box-muller on 53-bit uniforms";

 private:
  std::array<std::uint32_t, 2> key_;
};

/// SplitMix64 finalizer; used to derive sub-keys.
std::uint64_t mix64(std::uint64_t x);

}  // namespace singular_drift
