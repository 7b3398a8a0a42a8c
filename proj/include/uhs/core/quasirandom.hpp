#pragma once

#include "uhs/core/common.hpp"

#include <random>

namespace uhs {

/// Halton sequence with a seeded Cranley-Patterson rotation: low discrepancy and
/// reproducible for a given (seed, dimension).
class HaltonSequence {
 public:
  HaltonSequence(int dimension, std::uint64_t seed) : dim_(dimension), shift_(dimension) {
    static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (dimension < 1 || dimension > 16) throw ConfigError("halton: dimension must be in [1, 16]");
    bases_.assign(kPrimes, kPrimes + dimension);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : shift_) s = u(rng);
  }

  int dimension() const { return dim_; }

  /// Point number `index` (0-based) in [0, 1)^dim.
  std::vector<double> point(std::uint64_t index) const {
    std::vector<double> p(dim_);
    for (int d = 0; d < dim_; ++d) {
      double v = radical_inverse(index + 1, bases_[d]) + shift_[d];
      p[d] = v - std::floor(v);
    }
    return p;
  }

 private:
  static double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
      r += f * static_cast<double>(i % base);
      i /= base;
      f *= inv;
    }
    return r;
  }

  int dim_;
  std::vector<int> bases_;
  std::vector<double> shift_;
};

}  // namespace uhs
