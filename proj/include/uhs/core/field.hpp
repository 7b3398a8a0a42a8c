#pragma once

#include "uhs/core/fft.hpp"

#include <memory>
#include <mutex>
#include <span>

namespace uhs {

enum class Domain { physical, spectral };

/// Complex grid function. Physical fields cache their unitary spectrum on first use.
/// Values are immutable after construction, so the cache never goes stale.
class ComplexField {
 public:
  ComplexField(Grid grid, std::vector<Complex> values, Domain domain = Domain::physical)
      : grid_(std::move(grid)), values_(std::move(values)), domain_(domain),
        cache_(std::make_shared<Cache>()) {
    if (values_.size() != grid_.size())
      throw ConfigError("field: value count " + std::to_string(values_.size()) + " does not match grid size " +
                        std::to_string(grid_.size()));
  }

  static ComplexField zeros(const Grid& grid) { return {grid, std::vector<Complex>(grid.size())}; }

  template <class Fn>
  static ComplexField from_function(const Grid& grid, Fn&& fn) {
    std::vector<Complex> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = fn(grid.point(i));
    return {grid, std::move(v)};
  }

  const Grid& grid() const { return grid_; }
  Domain domain() const { return domain_; }
  std::span<const Complex> values() const { return values_; }
  const std::vector<Complex>& data() const { return values_; }
  Complex operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  /// Unitary spectrum on the frequency lattice (FFT order); cached.
  const std::vector<Complex>& spectrum() const;

  bool has_spectrum() const { return cache_->ready; }

 private:
  struct Cache {
    std::once_flag once;
    std::vector<Complex> spectrum;
    bool ready = false;
  };

  Grid grid_;
  std::vector<Complex> values_;
  Domain domain_;
  std::shared_ptr<Cache> cache_;
};

namespace detail {

inline double unitary_scale(const Grid& grid) { return std::pow(2.0 * grid.half_width(), -0.5 * grid.dim()); }

inline std::vector<Complex> forward_unitary(const Grid& grid, std::span<const Complex> values) {
  std::vector<Complex> out(values.size());
  fft::execute(grid, fft::Direction::forward, values.data(), out.data());
  const double c = unitary_scale(grid) * grid.cell_volume();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= c * fft::alternating_sign(grid, k);
  return out;
}

inline std::vector<Complex> inverse_unitary(const Grid& grid, std::span<const Complex> spectrum) {
  std::vector<Complex> tmp(spectrum.size());
  const double c = unitary_scale(grid);
  for (std::size_t k = 0; k < tmp.size(); ++k) tmp[k] = spectrum[k] * (c * fft::alternating_sign(grid, k));
  fft::execute(grid, fft::Direction::inverse, tmp.data(), tmp.data());
  return tmp;
}

}  // namespace detail

inline const std::vector<Complex>& ComplexField::spectrum() const {
  if (domain_ != Domain::physical) throw PreconditionError("field: spectrum() requested on a spectral-domain field");
  std::call_once(cache_->once, [this] {
    cache_->spectrum = detail::forward_unitary(grid_, values_);
    cache_->ready = true;
  });
  return cache_->spectrum;
}

/// Unitary DFT: u_hat(xi) = (2L)^{-n/2} h^n sum_x u(x) e^{-i x.xi}; inverse is its adjoint.
inline ComplexField spectral_transform(const ComplexField& field, fft::Direction direction) {
  if (direction == fft::Direction::forward) {
    if (field.domain() != Domain::physical) throw PreconditionError("spectral_transform: forward needs a physical field");
    return {field.grid(), field.spectrum(), Domain::spectral};
  }
  if (field.domain() != Domain::spectral) throw PreconditionError("spectral_transform: inverse needs a spectral field");
  return {field.grid(), detail::inverse_unitary(field.grid(), field.values()), Domain::physical};
}

/// Grid inner product <u, v> = h^n sum u conj(v).
inline Complex inner(std::span<const Complex> u, std::span<const Complex> v, double cell_volume) {
  Complex s{};
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * std::conj(v[i]);
  return s * cell_volume;
}

inline Complex inner(const ComplexField& u, const ComplexField& v) {
  return inner(u.values(), v.values(), u.grid().cell_volume());
}

inline double l2_norm(std::span<const Complex> u, double cell_volume) {
  double s = 0.0;
  for (auto z : u) s += std::norm(z);
  return std::sqrt(s * cell_volume);
}

inline double l2_norm(const ComplexField& u) { return l2_norm(u.values(), u.grid().cell_volume()); }

/// Fourier multiplier m(xi) applied to a physical field.
template <class Multiplier>
ComplexField apply_multiplier(const ComplexField& field, Multiplier&& m) {
  const Grid& g = field.grid();
  std::vector<Complex> spec = field.spectrum();
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= m(g.frequency(k));
  return {g, detail::inverse_unitary(g, spec)};
}

/// Bessel potential J^s: multiplier <xi>^s.
inline ComplexField bessel_apply(const ComplexField& field, double s) {
  if (s == 0.0) return field;
  return apply_multiplier(field, [s](const VecN& xi) { return std::pow(1.0 + xi.squaredNorm(), 0.5 * s); });
}

/// ||<x>^r J^s u||_2 by the periodic trapezoidal rule.
inline double weighted_norm(const ComplexField& field, double s, double r) {
  const ComplexField js = bessel_apply(field, s);
  const Grid& g = field.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = r == 0.0 ? 1.0 : std::pow(1.0 + g.point(i).squaredNorm(), r);
    acc += w * std::norm(js[i]);
  }
  return std::sqrt(acc * g.cell_volume());
}

}  // namespace uhs
