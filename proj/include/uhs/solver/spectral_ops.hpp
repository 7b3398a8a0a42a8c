#pragma once

#include "uhs/core/field.hpp"

namespace uhs {

/// Precomputed lattice data for the time stepper: unitary transforms without per-call
/// index arithmetic, frequency components and the 2/3 dealiasing mask.
class SpectralOps {
 public:
  explicit SpectralOps(Grid grid) : grid_(std::move(grid)) {
    const std::size_t size = grid_.size();
    const int n = grid_.dim();
    sign_.resize(size);
    xi_.assign(static_cast<std::size_t>(n) * size, 0.0);
    xi2_.resize(size);
    mask_.resize(size);
    const int cut = grid_.points() / 3;
    for (std::size_t k = 0; k < size; ++k) {
      sign_[k] = fft::alternating_sign(grid_, k);
      const auto m = grid_.modes(k);
      const VecN f = grid_.frequency(k);
      bool keep = true;
      for (int d = 0; d < n; ++d) {
        xi_[d * size + k] = f(d);
        keep = keep && std::abs(m[d]) < cut;
      }
      xi2_[k] = f.squaredNorm();
      mask_[k] = keep ? 1.0 : 0.0;
    }
    fwd_scale_ = detail::unitary_scale(grid_) * grid_.cell_volume();
    inv_scale_ = detail::unitary_scale(grid_);
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  const double* xi(int d) const { return xi_.data() + d * size(); }
  const std::vector<double>& xi_squared() const { return xi2_; }
  const std::vector<double>& mask() const { return mask_; }

  /// Largest |xi|^2 kept by the dealiasing mask.
  double band_xi2_max() const {
    double m = 0.0;
    for (std::size_t k = 0; k < size(); ++k)
      if (mask_[k] > 0.0) m = std::max(m, xi2_[k]);
    return m;
  }

  void forward(const std::vector<Complex>& in, std::vector<Complex>& out) const {
    out.resize(in.size());
    fft::execute(grid_, fft::Direction::forward, in.data(), out.data());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= fwd_scale_ * sign_[k];
  }

  void inverse(const std::vector<Complex>& in, std::vector<Complex>& out) const {
    out.resize(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] * (inv_scale_ * sign_[k]);
    fft::execute(grid_, fft::Direction::inverse, out.data(), out.data());
  }

 private:
  Grid grid_;
  std::vector<double> sign_, xi_, xi2_, mask_;
  double fwd_scale_ = 1.0, inv_scale_ = 1.0;
};

}  // namespace uhs
