#pragma once

#include "uhs/core/common.hpp"

#include <limits>

namespace uhs::ode {

using State = Eigen::VectorXd;

enum class Status { reached, stopped, underflow, nonfinite };

struct Options {
  double tol = 1e-10;     ///< mixed absolute/relative, max norm
  double h_max = 1.0;
  double h_min_rel = 1e-14;
};

/// Dormand-Prince 5(4) with FSAL and local extrapolation.
/// Integrates y' = f(s, y) from s0 to s1 (s1 > s0). `h` carries the step size in and out
/// so that successive segments continue without a cold start. The observer is called
/// after every accepted step as obs(s, y) and may return false to stop.
template <class Rhs, class Obs>
Status dopri5(Rhs&& f, State& y, double s0, double s1, double& h, const Options& opt, Obs&& obs) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // Error weights: 5th minus embedded 4th order.
  static constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                          e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

  if (!(s1 > s0)) return Status::reached;
  if (!(h > 0.0)) h = std::min(1e-3, s1 - s0);
  State k1 = f(s0, y), k2, k3, k4, k5, k6, k7, tmp, ynew, err;
  double s = s0;
  while (s < s1) {
    const double hmin = opt.h_min_rel * std::max(1.0, std::abs(s));
    h = std::min(h, opt.h_max);
    if (h < hmin) return Status::underflow;
    // Landing exactly on s1 must not shrink the step carried into the next segment.
    const double h_carry = h;
    const bool clamped = h > s1 - s;
    if (clamped) h = s1 - s;
    tmp = y + h * a21 * k1;
    k2 = f(s + c2 * h, tmp);
    tmp = y + h * (a31 * k1 + a32 * k2);
    k3 = f(s + c3 * h, tmp);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    k4 = f(s + c4 * h, tmp);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    k5 = f(s + c5 * h, tmp);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    k6 = f(s + h, tmp);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = f(s + h, ynew);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opt.tol * (1.0 + std::max(std::abs(y(i)), std::abs(ynew(i))));
      const double ei = std::abs(err(i)) / sc;
      en = std::isfinite(ei) && std::isfinite(ynew(i)) ? std::max(en, ei) : ei + std::numeric_limits<double>::infinity();
      if (!std::isfinite(en)) break;
    }
    if (!std::isfinite(en)) {
      h *= 0.25;
      if (h < hmin) return Status::nonfinite;
      continue;
    }
    if (en <= 1.0) {
      const bool last = s + h >= s1;
      s = last ? s1 : s + h;
      y.swap(ynew);
      k1.swap(k7);
      if (!obs(s, static_cast<const State&>(y))) return Status::stopped;
      h = clamped ? h_carry : h * (en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0));
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
  return Status::reached;
}

}  // namespace uhs::ode
