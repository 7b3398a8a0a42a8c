#pragma once

#include "uhs/rays/flow.hpp"
#include "uhs/symbols/truncation.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <map>

namespace uhs {

enum class B1Variant { order_zero, s_derivative };

inline std::string to_string(B1Variant v) { return v == B1Variant::order_zero ? "order_zero" : "s_derivative"; }

struct IntegratingFactorOptions {
  B1Variant variant = B1Variant::order_zero;
  int s = 0;                ///< Sobolev index of the s_derivative variant
  double ray_tol = 1e-9;
  double tail_rel = 1e-8;   ///< tail must stay below tail_rel * |accumulated integral|
  bool symmetrize = true;   ///< k = exp(+-p_e); false uses exp(+-p) directly
  unsigned jobs = 1;
};

/// I(x, xi) = int_{-inf}^0 b(X^R(s), Xi^R(s)) ds along the truncated flow, where
/// b(x, xi) = -i b1(x, 0).xi, plus s (sum_jk d_j a^R_jk xi_j xi_k)(sum_l xi_l) <xi>^{-2}
/// for the s_derivative variant.
class RayIntegral {
 public:
  RayIntegral(TruncatedOperator op, IntegratingFactorOptions opt) : op_(std::move(op)), opt_(opt) {}

  const TruncatedOperator& op() const { return op_; }

  Complex integrand(const VecN& x, const VecN& xi) const {
    const CoefficientModel& m = op_.model();
    Complex v = -kI * (m.b1(x, 0.0).array() * xi.cast<Complex>().array()).sum();
    if (opt_.variant == B1Variant::s_derivative && opt_.s != 0) {
      const auto grad = op_.a_gradient(x);
      double q = 0.0;
      for (int j = 0; j < op_.dim(); ++j) q += xi(j) * grad[j].row(j).dot(xi);
      v += opt_.s * q * xi.sum() / (1.0 + xi.squaredNorm());
    }
    return v;
  }

  /// Closed-form bound on the remaining straight-line tail from |X| = rho outward:
  /// C_b int_0^inf |Xi| (1 + rho^2 + 4|Xi|^2 s^2)^{-N/2} ds.
  double tail_bound(double rho) const {
    const CoefficientModel& m = op_.model();
    if (rho >= m.flat_radius() || m.b1_zero()) return 0.0;
    const int big_n = m.decay_exponent();
    if (big_n <= 1) return std::numeric_limits<double>::infinity();
    const double a = bracket(rho);
    return m.b1_decay_constant() * std::pow(a, 1.0 - big_n) * std::sqrt(kPi) *
           std::exp(boost::math::lgamma(0.5 * (big_n - 1)) - boost::math::lgamma(0.5 * big_n)) / 4.0;
  }

  Complex operator()(const VecN& x, const VecN& xi) const {
    const MatN ah = op_.model().signature().matrix();
    double rho = std::max(4.0 * op_.radius(), 1.1 * x.norm());
    PhasePoint state(x, xi);
    Complex acc{};
    RayOptions ro;
    ro.backward = true;
    ro.tol = opt_.ray_tol;
    ro.store_samples = false;
    ro.h_max = 1.0 / xi.norm();
    ro.s_max = 1e4 / xi.norm();
    ro.integrand = [this](const VecN& y, const VecN& eta) { return integrand(y, eta); };
    for (int round = 0; round < 64; ++round) {
      ro.rho_escape = rho;
      const auto tr = integrate_ray(op_, state, ro);
      acc += tr.integrals.back();
      if (tr.terminated_by != Termination::escape)
        throw DomainError("symbol_p_R: truncated ray did not escape (" + to_string(tr.terminated_by) + ")");
      state = PhasePoint(tr.back().X, tr.back().Xi);
      // Backward velocity is -2 A_h Xi once outside 2R; outward when X . (-A_h Xi) >= 0.
      const bool outward = state.x.dot(ah * state.xi) <= 0.0;
      if (outward && tail_bound(state.x.norm()) <= opt_.tail_rel * std::abs(acc) + 1e-15) return acc;
      rho *= 2.0;
    }
    throw DomainError("symbol_p_R: tail did not converge");
  }

 private:
  TruncatedOperator op_;
  IntegratingFactorOptions opt_;
};

/// p^R(x, xi) = -chi(|xi|) I(x, xi), evaluated by ray integration at each call.
inline Symbol symbol_p_R(const TruncatedOperator& op, const IntegratingFactorOptions& opt = {}) {
  if (opt.variant == B1Variant::order_zero && op.model().b1_zero()) return Symbol::constant(0.0);
  auto ri = std::make_shared<RayIntegral>(op, opt);
  return Symbol(
      [ri](const VecN& x, const VecN& xi) -> Complex {
        const double c = cutoff_chi(xi.norm());
        if (c == 0.0) return {};
        return -c * (*ri)(x, xi);
      },
      0.0, SymbolClass::classical);
}

/// Largest (x, xi) table built in memory: 2^26 complex entries (1 GiB) per table.
inline constexpr std::size_t kMaxTableEntries = std::size_t{1} << 26;

struct IntegratingFactor {
  Symbol p_R;
  Symbol p_e_R;
  Symbol k_plus;
  Symbol k_minus;
  double ray_tolerance = 0.0;
  bool symmetrized = true;
};

namespace detail {

using DirKey = std::array<int, kMaxDim>;

inline DirKey primitive_direction(DirKey m, int n) {
  int g = 0;
  for (int d = 0; d < n; ++d) g = std::gcd(g, std::abs(m[d]));
  for (int d = 0; d < n; ++d) m[d] /= g;
  for (int d = n; d < kMaxDim; ++d) m[d] = 0;
  return m;
}

// Table of -chi(|xi_m|) I(x_j, xi_m) and of its even part, using that I is homogeneous of
// degree zero in xi: one ray per (x, primitive lattice direction).
inline std::pair<std::shared_ptr<SymbolTable>, std::shared_ptr<SymbolTable>> direction_tables(
    const RayIntegral& ri, const Grid& g, unsigned jobs) {
  const int n = g.dim();
  const std::size_t size = g.size();
  std::map<DirKey, std::size_t> index;
  std::vector<DirKey> dirs;
  std::vector<std::size_t> pos(size, 0), neg(size, 0);
  auto lookup = [&](const DirKey& m) {
    const DirKey key = primitive_direction(m, n);
    auto [it, fresh] = index.emplace(key, dirs.size());
    if (fresh) dirs.push_back(key);
    return it->second;
  };
  std::vector<double> chi(size);
  for (std::size_t m = 0; m < size; ++m) {
    chi[m] = cutoff_chi(g.frequency(m).norm());
    if (chi[m] == 0.0) continue;
    const DirKey mk = g.modes(m);
    DirKey nk = mk;
    for (int d = 0; d < n; ++d) nk[d] = -nk[d];
    pos[m] = lookup(mk);
    neg[m] = lookup(nk);
  }
  const std::size_t nd = dirs.size();
  std::vector<Complex> vals(size * nd);
  parallel_for(
      size,
      [&](std::size_t j) {
        const VecN x = g.point(j);
        for (std::size_t d = 0; d < nd; ++d) {
          VecN w(n);
          for (int a = 0; a < n; ++a) w(a) = dirs[d][a];
          vals[j * nd + d] = ri(x, w / w.norm());
        }
      },
      jobs);
  auto p = std::make_shared<SymbolTable>(g);
  auto pe = std::make_shared<SymbolTable>(g);
  for (std::size_t j = 0; j < size; ++j)
    for (std::size_t m = 0; m < size; ++m) {
      if (chi[m] == 0.0) continue;
      const Complex a = vals[j * nd + pos[m]], b = vals[j * nd + neg[m]];
      p->at(j, m) = -chi[m] * a;
      pe->at(j, m) = -chi[m] * 0.5 * (a + b);
    }
  return {p, pe};
}

}  // namespace detail

/// p^R, its even part and k = exp(+-p_e^R). With a grid, tables on the grid lattice are
/// built up front (parallel over x) and attached to every symbol.
inline IntegratingFactor integrating_factor(const TruncatedOperator& op, const IntegratingFactorOptions& opt,
                                            const Grid* grid = nullptr) {
  IntegratingFactor f{symbol_p_R(op, opt), Symbol::constant(0.0), Symbol::constant(1.0), Symbol::constant(1.0),
                      opt.ray_tol, opt.symmetrize};
  if (!f.p_R.is_multiplier() && grid != nullptr && grid->size() * grid->size() > kMaxTableEntries)
    throw ConfigError("integrating_factor: the (x, xi) table for M = " + std::to_string(grid->points()) +
                      " does not fit in memory; use a smaller grid for non-zero b1");
  if (f.p_R.is_multiplier()) {
    f.p_e_R = even_part(f.p_R);
  } else if (grid != nullptr && opt.variant == B1Variant::order_zero) {
    if (2.0 * op.radius() > 0.9 * grid->half_width()) throw ConfigError("integrating_factor: 2R must not exceed 0.9 L");
    RayIntegral ri(op, opt);
    auto [p, pe] = detail::direction_tables(ri, *grid, opt.jobs);
    f.p_R = f.p_R.with_table(p);
    f.p_e_R = even_part(f.p_R.with_table(nullptr)).with_table(pe);
  } else if (grid != nullptr) {
    auto t = std::make_shared<SymbolTable>(*grid);
    const std::size_t size = grid->size();
    parallel_for(
        size, [&](std::size_t j) { f.p_R.fill(*grid, j, 0, size, t->values.data() + j * size); }, opt.jobs);
    f.p_R = f.p_R.with_table(t);
    f.p_e_R = even_part(f.p_R);
  } else {
    f.p_e_R = even_part(f.p_R);
  }
  const Symbol& base = opt.symmetrize ? f.p_e_R : f.p_R;
  f.k_plus = map_symbol(base, [](Complex z) { return std::exp(z); }, 0.0);
  f.k_minus = map_symbol(base, [](Complex z) { return std::exp(-z); }, 0.0);
  return f;
}

/// Rebuilds the factor from previously computed p^R and even-part tables (e.g. a cache).
inline IntegratingFactor integrating_factor_from_tables(const TruncatedOperator& op, const IntegratingFactorOptions& opt,
                                                        std::shared_ptr<const SymbolTable> p,
                                                        std::shared_ptr<const SymbolTable> pe) {
  IntegratingFactor f{symbol_p_R(op, opt), Symbol::constant(0.0), Symbol::constant(1.0), Symbol::constant(1.0),
                      opt.ray_tol, opt.symmetrize};
  if (f.p_R.is_multiplier()) {
    f.p_e_R = even_part(f.p_R);
  } else {
    f.p_R = f.p_R.with_table(std::move(p));
    f.p_e_R = even_part(f.p_R.with_table(nullptr)).with_table(std::move(pe));
  }
  const Symbol& base = opt.symmetrize ? f.p_e_R : f.p_R;
  f.k_plus = map_symbol(base, [](Complex z) { return std::exp(z); }, 0.0);
  f.k_minus = map_symbol(base, [](Complex z) { return std::exp(-z); }, 0.0);
  return f;
}

}  // namespace uhs
