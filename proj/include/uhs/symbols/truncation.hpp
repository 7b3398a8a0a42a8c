#pragma once

#include "uhs/core/coefficients.hpp"
#include "uhs/core/grid.hpp"
#include "uhs/symbols/symbol.hpp"

namespace uhs {

/// a^R(x) = theta(x/R) a(x, 0) + (1 - theta(x/R)) A_h, a time-independent principal part
/// equal to a(., 0) on |x| <= R and to A_h on |x| >= 2R.
class TruncatedOperator {
 public:
  TruncatedOperator(CoefficientModel model, double radius) : model_(std::move(model)), r_(radius) {
    if (!(radius > 0.0)) throw ConfigError("truncate: R must be positive");
  }

  int dim() const { return model_.dim(); }
  double radius() const { return r_; }
  double flat_radius() const { return 2.0 * r_; }
  const CoefficientModel& model() const { return model_; }

  double theta(const VecN& x) const { return cutoff_theta(x / r_); }

  MatN a(const VecN& x, double = 0.0) const {
    const double th = theta(x);
    const MatN ah = model_.signature().matrix();
    if (th == 0.0) return ah;
    return th * model_.a(x, 0.0) + (1.0 - th) * ah;
  }

  std::array<MatN, kMaxDim> a_gradient(const VecN& x, double = 0.0) const {
    std::array<MatN, kMaxDim> out;
    const int n = dim();
    const double th = theta(x);
    if (th == 0.0) {
      for (int l = 0; l < n; ++l) out[l] = MatN::Zero(n, n);
      return out;
    }
    const auto ga = model_.a_gradient(x, 0.0);
    const VecN gt = cutoff_theta_gradient(x / r_) / r_;
    const MatN dev = model_.a(x, 0.0) - model_.signature().matrix();
    for (int l = 0; l < n; ++l) out[l] = th * ga[l] + gt(l) * dev;
    return out;
  }

  /// Coefficient (1 - theta(x/R)) (a(x, 0) - A_h) of the remainder E^R.
  MatN remainder(const VecN& x) const {
    return (1.0 - theta(x)) * (model_.a(x, 0.0) - model_.signature().matrix());
  }

 private:
  CoefficientModel model_;
  double r_;
};

/// Requires 2R <= 0.9 L so the truncation completes inside the box.
inline TruncatedOperator truncate(const CoefficientModel& model, double radius, double box_half_width) {
  if (2.0 * radius > 0.9 * box_half_width)
    throw ConfigError("truncate: 2R must not exceed 0.9 L");
  return {model, radius};
}

inline TruncatedOperator truncate(const CoefficientModel& model, double radius, const Grid& grid) {
  return truncate(model, radius, grid.half_width());
}

}  // namespace uhs
