#pragma once

#include "uhs/core/coefficients.hpp"
#include "uhs/core/quasirandom.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <optional>

namespace uhs {

struct EscapeGradient {
  VecN dx;
  VecN dxi;
};

/// Order-zero symbol p(x, xi) = g(x . A_h xi / |xi|) with g(r) = int_0^r <rho>^{-Ntilde} d rho.
class EscapeFunction {
 public:
  enum class Kind { flat_analytic };

  EscapeFunction(Signature sig, double ntilde) : sig_(std::move(sig)), ntilde_(ntilde) {
    if (!(ntilde > 1.0)) throw PreconditionError("escape function: Ntilde must exceed 1 for g to be bounded");
  }

  Kind kind() const { return Kind::flat_analytic; }
  double ntilde() const { return ntilde_; }
  const Signature& signature() const { return sig_; }

  /// g(r) = sign(r) * B(r^2 / (1 + r^2); 1/2, (Ntilde - 1)/2) / 2 (non-normalized incomplete beta).
  double profile(double r) const {
    if (r == 0.0) return 0.0;
    const double u = r * r / (1.0 + r * r);
    const double g = 0.5 * boost::math::beta(0.5, 0.5 * (ntilde_ - 1.0), u);
    return r > 0.0 ? g : -g;
  }

  double profile_prime(double r) const { return std::pow(1.0 + r * r, -0.5 * ntilde_); }

  /// sup |p| = g(infinity) = B(1/2, (Ntilde - 1)/2) / 2.
  double bound() const { return 0.5 * boost::math::beta(0.5, 0.5 * (ntilde_ - 1.0)); }

  double argument(const VecN& x, const VecN& xi) const { return x.dot(sig_.apply(xi)) / xi.norm(); }

  double operator()(const VecN& x, const VecN& xi) const { return profile(argument(x, xi)); }

  EscapeGradient gradient(const VecN& x, const VecN& xi) const {
    const double nx = xi.norm();
    const VecN ahxi = sig_.apply(xi);
    const double r = x.dot(ahxi) / nx;
    const double gp = profile_prime(r);
    return {gp * ahxi / nx, gp * (sig_.apply(x) / nx - r * xi / (nx * nx))};
  }

 private:
  Signature sig_;
  double ntilde_;
};

inline EscapeFunction escape_function_flat(const Signature& sig, double ntilde) { return {sig, ntilde}; }

/// H_{h2} p = d_xi h2 . d_x p - d_x h2 . d_xi p, h2 = a_jk(x, t) xi_j xi_k.
inline double hamilton_derivative(const CoefficientModel& model, const EscapeFunction& p, double t, const VecN& x,
                                  const VecN& xi) {
  const auto gp = p.gradient(x, xi);
  const VecN dxi_h = 2.0 * model.a(x, t) * xi;
  const auto grad = model.a_gradient(x, t);
  double out = dxi_h.dot(gp.dx);
  for (int l = 0; l < model.dim(); ++l) out -= xi.dot(grad[l] * xi) * gp.dxi(l);
  return out;
}

struct GardingOptions {
  std::uint64_t seed = 0;
  double xi_max = 0.0;    ///< upper |xi|; pi M / (2L) in practice
  double x_radius = 0.0;  ///< half width of the sampled x-box; defaults to 1.05 flat_radius
};

struct GardingResult {
  double margin = 0.0;
  VecN x_min;
  VecN xi_min;
};

/// min over samples (x, xi), 1 <= |xi| <= xi_max, of H_{h2}p - |xi| / (2 <x>^Ntilde) + 2 c0.
inline GardingResult garding_margin_detail(const CoefficientModel& model, const EscapeFunction& p, double t,
                                           std::size_t sample_budget, double c0, const GardingOptions& opt) {
  if (sample_budget < 10000) throw PreconditionError("garding_margin: sample_budget must be >= 1e4");
  if (!(opt.xi_max >= 1.0)) throw PreconditionError("garding_margin: xi_max must be >= 1");
  const int n = model.dim();
  const double xr = opt.x_radius > 0.0 ? opt.x_radius : 1.05 * model.flat_radius();
  const HaltonSequence seq(2 * n, opt.seed);
  GardingResult res{std::numeric_limits<double>::infinity(), VecN::Zero(n), VecN::Zero(n)};
  for (std::size_t s = 0; s < sample_budget; ++s) {
    const auto q = seq.point(s);
    VecN x(n), dir(n);
    for (int d = 0; d < n; ++d) x(d) = xr * (2.0 * q[d] - 1.0);
    // Direction from the angle(s), radius uniform in [1, xi_max].
    if (n == 1) {
      dir(0) = q[n] < 0.5 ? -1.0 : 1.0;
    } else if (n == 2) {
      const double th = 2.0 * kPi * q[n];
      dir << std::cos(th), std::sin(th);
    } else {
      const double zc = 2.0 * q[n] - 1.0, ph = 2.0 * kPi * q[n + 1];
      const double rho = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      dir << rho * std::cos(ph), rho * std::sin(ph), zc;
    }
    const double mag = 1.0 + (opt.xi_max - 1.0) * q[2 * n - 1];
    const VecN xi = mag * dir;
    const double m = hamilton_derivative(model, p, t, x, xi) - mag / (2.0 * std::pow(bracket(x), p.ntilde())) + 2.0 * c0;
    if (m < res.margin) res = {m, x, xi};
  }
  return res;
}

inline double garding_margin(const CoefficientModel& model, const EscapeFunction& p, double t,
                             std::size_t sample_budget, double c0, const GardingOptions& opt) {
  return garding_margin_detail(model, p, t, sample_budget, c0, opt).margin;
}

/// Smallest t in [0, t_max] (to `t_tol`) at which the margin stops being positive, found
/// by bisection; nullopt when it stays positive on the whole interval.
inline std::optional<double> garding_threshold_time(const CoefficientModel& model, const EscapeFunction& p,
                                                    double t_max, std::size_t sample_budget, double c0,
                                                    const GardingOptions& opt, double t_tol = 1e-3) {
  auto positive = [&](double t) { return garding_margin(model, p, t, sample_budget, c0, opt) > 0.0; };
  if (!positive(0.0)) return 0.0;
  if (positive(t_max)) return std::nullopt;
  double lo = 0.0, hi = t_max;
  while (hi - lo > t_tol) {
    const double mid = 0.5 * (lo + hi);
    (positive(mid) ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace uhs
