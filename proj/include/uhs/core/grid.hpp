#pragma once

#include "uhs/core/common.hpp"

#include <array>
#include <string>

namespace uhs {

/// Periodic box [-L, L)^n sampled with M points per axis, row-major (axis 0 slowest).
/// The frequency lattice is (pi/L) * m with m in [-M/2, M/2), stored in FFT order.
class Grid {
 public:
  Grid(int n, int points_per_axis, double half_width) : n_(n), m_(points_per_axis), l_(half_width) {
    if (n < 1 || n > kMaxDim) throw ConfigError("grid: dimension must be in [1, 3]");
    if (m_ < 2 || (m_ & (m_ - 1)) != 0)
      throw ConfigError("grid: points per axis must be a power of two, got " + std::to_string(m_));
    if (!(l_ > 0.0)) throw ConfigError("grid: half width must be positive");
    size_ = 1;
    for (int d = 0; d < n_; ++d) size_ *= static_cast<std::size_t>(m_);
  }

  int dim() const { return n_; }
  int points() const { return m_; }
  double half_width() const { return l_; }
  std::size_t size() const { return size_; }
  double spacing() const { return 2.0 * l_ / m_; }
  double cell_volume() const { return std::pow(spacing(), n_); }
  double box_volume() const { return std::pow(2.0 * l_, n_); }
  double frequency_step() const { return kPi / l_; }
  /// Largest |xi_j| on the lattice (the Nyquist magnitude pi*M/(2L)).
  double nyquist() const { return kPi * m_ / (2.0 * l_); }

  std::array<int, kMaxDim> unravel(std::size_t flat) const {
    std::array<int, kMaxDim> idx{};
    for (int d = n_ - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % m_);
      flat /= m_;
    }
    return idx;
  }

  std::size_t ravel(const std::array<int, kMaxDim>& idx) const {
    std::size_t flat = 0;
    for (int d = 0; d < n_; ++d) flat = flat * m_ + static_cast<std::size_t>(idx[d]);
    return flat;
  }

  double coordinate(int i) const { return -l_ + i * spacing(); }

  VecN point(std::size_t flat) const {
    const auto idx = unravel(flat);
    VecN x(n_);
    for (int d = 0; d < n_; ++d) x(d) = coordinate(idx[d]);
    return x;
  }

  /// Signed lattice index for FFT-order position k.
  int mode(int k) const { return k < m_ / 2 ? k : k - m_; }

  std::array<int, kMaxDim> modes(std::size_t flat) const {
    auto idx = unravel(flat);
    for (int d = 0; d < n_; ++d) idx[d] = mode(idx[d]);
    return idx;
  }

  VecN frequency(std::size_t flat) const {
    const auto m = modes(flat);
    VecN xi(n_);
    for (int d = 0; d < n_; ++d) xi(d) = frequency_step() * m[d];
    return xi;
  }

  /// FFT-order flat index of the lattice frequency with signed modes `m` (taken mod M).
  std::size_t frequency_index(const std::array<int, kMaxDim>& m) const {
    std::array<int, kMaxDim> idx{};
    for (int d = 0; d < n_; ++d) idx[d] = ((m[d] % m_) + m_) % m_;
    return ravel(idx);
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.n_ == b.n_ && a.m_ == b.m_ && a.l_ == b.l_;
  }

 private:
  int n_;
  int m_;
  double l_;
  std::size_t size_{1};
};

}  // namespace uhs
