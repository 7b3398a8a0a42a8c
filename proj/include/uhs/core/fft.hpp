#pragma once

#include "uhs/core/grid.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace uhs::fft {

enum class Direction { forward, inverse };

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Grid& grid, Direction dir, bool in_place) {
    const auto key = std::make_tuple(grid.dim(), grid.points(), dir == Direction::forward, in_place);
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    int dims[kMaxDim];
    for (int d = 0; d < grid.dim(); ++d) dims[d] = grid.points();
    auto* a = fftw_alloc_complex(grid.size());
    auto* b = in_place ? a : fftw_alloc_complex(grid.size());
    const int sign = dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = fftw_plan_dft(grid.dim(), dims, a, b, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!in_place) fftw_free(b);
    fftw_free(a);
    if (plan == nullptr) throw ConfigError("fft: FFTW could not plan this grid");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, bool, bool>, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalized DFT over the grid shape: forward uses e^{-2 pi i jk/M}, inverse e^{+...}.
/// `in` and `out` may alias.
inline void execute(const Grid& grid, Direction dir, const Complex* in, Complex* out) {
  const bool in_place = in == out;
  fftw_plan plan = detail::PlanCache::instance().get(grid, dir, in_place);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

/// (-1)^{sum of FFT indices}; the phase e^{iL xi} picked up by a box starting at -L.
inline double alternating_sign(const Grid& grid, std::size_t flat) {
  const auto idx = grid.unravel(flat);
  int s = 0;
  for (int d = 0; d < grid.dim(); ++d) s += idx[d];
  return (s & 1) ? -1.0 : 1.0;
}

}  // namespace uhs::fft
