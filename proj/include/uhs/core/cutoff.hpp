#pragma once

#include "uhs/core/common.hpp"

namespace uhs {

namespace detail {
inline double bump_exp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double bump_exp_prime(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
}  // namespace detail

/// C-infinity step: 0 for tau <= 0, 1 for tau >= 1, monotone in between,
/// built from the flat function e^{-1/t}.
inline double smooth_step(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  const double a = detail::bump_exp(tau);
  const double b = detail::bump_exp(1.0 - tau);
  return a / (a + b);
}

inline double smooth_step_prime(double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  const double a = detail::bump_exp(tau);
  const double b = detail::bump_exp(1.0 - tau);
  const double da = detail::bump_exp_prime(tau);
  const double db = -detail::bump_exp_prime(1.0 - tau);
  return (da * b - a * db) / ((a + b) * (a + b));
}

/// Radial cutoff equal to 1 for r <= inner and 0 for r >= outer.
struct RadialCutoff {
  double inner;
  double outer;

  double value(double r) const { return 1.0 - smooth_step((r - inner) / (outer - inner)); }
  double derivative(double r) const { return -smooth_step_prime((r - inner) / (outer - inner)) / (outer - inner); }
};

}  // namespace uhs
