#pragma once

#include <vector>

#include "singular_drift/spectral.hpp"

namespace singular_drift {

/// Uniform time nodes t_m = m T / M, m = 0..M.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, int intervals);

  double horizon() const { return horizon_; }
  int intervals() const { return intervals_; }
  int nodes() const { return intervals_ + 1; }
  double step() const { return horizon_ / intervals_; }
  double node(int m) const { return horizon_ * m / intervals_; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_ = 1.0;
  int intervals_ = 2;
};

/// One vector-valued spectral field per time node, all on one lattice.
class TimeField {
 public:
  TimeField() = default;
  TimeField(TimeGrid time, std::vector<SpectralField> nodes);

  /// Zero field with `components` components at every node.
  static TimeField zeros(const TimeGrid& time, const GridSpec& grid, int components);
  static TimeField constant_in_time(const TimeGrid& time, const SpectralField& field);

  const TimeGrid& time() const { return time_; }
  const GridSpec& grid() const { return nodes_.front().grid(); }
  int components() const { return nodes_.front().components(); }
  int size() const { return static_cast<int>(nodes_.size()); }

  const SpectralField& operator[](int m) const { return nodes_[static_cast<std::size_t>(m)]; }
  SpectralField& operator[](int m) { return nodes_[static_cast<std::size_t>(m)]; }
  const std::vector<SpectralField>& nodes() const { return nodes_; }

  TimeField& operator+=(const TimeField& other);
  TimeField& operator-=(const TimeField& other);
  TimeField& operator*=(double scale);
  friend TimeField operator-(TimeField a, const TimeField& b) { return a -= b; }
  friend TimeField operator+(TimeField a, const TimeField& b) { return a += b; }
  friend TimeField operator*(double s, TimeField a) { return a *= s; }

  /// Node-wise map.
  template <typename Fn>
  TimeField map(Fn&& fn) const {
    std::vector<SpectralField> out;
    out.reserve(nodes_.size());
    for (const auto& node : nodes_) out.push_back(fn(node));
    return TimeField(time_, std::move(out));
  }

 private:
  TimeGrid time_;
  std::vector<SpectralField> nodes_;
};

}  // namespace singular_drift
