#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace uhs {

using Complex = std::complex<double>;

// Phase-space vectors never exceed three components; the fixed upper bound keeps
// them off the heap in the ray and symbol inner loops.
inline constexpr int kMaxDim = 3;
using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using MatN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using CVecN = Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;

/// Invalid configuration (grid sizes, radii, schema violations).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An operation's stated precondition does not hold.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Coefficient matrix singular at a sampled point.
class NonDegeneracyError : public std::runtime_error {
 public:
  NonDegeneracyError(const std::string& what, VecN point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const VecN& point() const { return point_; }

 private:
  VecN point_;
};

/// Quasilinear coefficients requested outside the admissible ball |z| <= r0.
class RangeError : public std::runtime_error {
 public:
  RangeError(const std::string& what, double max_z)
      : std::runtime_error(what), max_z_(max_z) {}
  double max_z() const { return max_z_; }

 private:
  double max_z_;
};

/// Japanese bracket <v> = (1 + |v|^2)^{1/2}.
inline double bracket(double r) { return std::sqrt(1.0 + r * r); }

template <class V>
double bracket(const V& v) {
  return std::sqrt(1.0 + v.squaredNorm());
}

inline VecN zeros(int n) { return VecN::Zero(n); }

inline VecN unit(int n, int axis) {
  VecN e = VecN::Zero(n);
  e(axis) = 1.0;
  return e;
}

/// Deterministic static partition of [0, count) across `jobs` threads.
/// Each index is processed exactly once; results must be written to disjoint slots.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned jobs = 0) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(count, 1)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  const std::size_t block = (count + jobs - 1) / jobs;
  for (unsigned w = 0; w < jobs; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace uhs
