#pragma once

#include "uhs/core/common.hpp"

#include <string>

namespace uhs {

/// Signature (k, n-k) of the constant matrix A_h = diag(I_k, -I_{n-k}).
class Signature {
 public:
  Signature(int n, int k) : n_(n), k_(k) {
    if (n < 1 || n > kMaxDim) throw ConfigError("signature: dimension must be in [1, 3], got " + std::to_string(n));
    if (k < 1 || k > n) throw ConfigError("signature: need 1 <= k <= n, got k=" + std::to_string(k));
  }

  int dim() const { return n_; }
  int positive() const { return k_; }
  bool elliptic() const { return k_ == n_; }

  /// Diagonal entry of A_h on `axis` (+1 or -1).
  double sign(int axis) const { return axis < k_ ? 1.0 : -1.0; }

  MatN matrix() const {
    MatN a = MatN::Zero(n_, n_);
    for (int j = 0; j < n_; ++j) a(j, j) = sign(j);
    return a;
  }

  /// A_h v without materializing the matrix.
  VecN apply(const VecN& v) const {
    VecN out = v;
    for (int j = k_; j < n_; ++j) out(j) = -out(j);
    return out;
  }

  /// h0(xi) = <A_h xi, xi>.
  double quadratic(const VecN& xi) const {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += sign(j) * xi(j) * xi(j);
    return s;
  }

  friend bool operator==(const Signature&, const Signature&) = default;

 private:
  int n_;
  int k_;
};

}  // namespace uhs
