#pragma once

#include "uhs/core/cutoff.hpp"
#include "uhs/core/grid.hpp"
#include "uhs/core/quasirandom.hpp"
#include "uhs/core/signature.hpp"

#include <memory>
#include <optional>

namespace uhs {

/// P(y, z) = y - (y.z) z / |z|^2, the projection onto the hyperplane orthogonal to z.
inline VecN projection(const VecN& y, const VecN& z) {
  const double zz = z.squaredNorm();
  if (!(zz > 0.0)) throw DomainError("projection: z must be non-zero");
  return y - (y.dot(z) / zz) * z;
}

/// chi(r) = 0 for r <= 1, 1 for r >= 2, smooth and monotone in between.
inline double cutoff_chi(double r) { return smooth_step(r - 1.0); }

/// theta(y) = 1 for |y| <= 1, 0 for |y| >= 2.
inline double cutoff_theta(const VecN& y) { return 1.0 - smooth_step(y.norm() - 1.0); }

inline VecN cutoff_theta_gradient(const VecN& y) {
  const double r = y.norm();
  if (r <= 1.0 || r >= 2.0) return VecN::Zero(y.size());
  return -smooth_step_prime(r - 1.0) * y / r;
}

enum class SymbolClass { projection_class, classical, multiplier };

/// Values a(x_j, xi_m) on a grid, rows indexed by x, columns by xi, both row-major flat.
struct SymbolTable {
  Grid grid;
  std::vector<Complex> values;

  SymbolTable(Grid g) : grid(std::move(g)), values(grid.size() * grid.size()) {}
  std::size_t rows() const { return grid.size(); }
  std::size_t cols() const { return grid.size(); }
  Complex& at(std::size_t row, std::size_t col) { return values[row * cols() + col]; }
  Complex at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }
};

class Symbol {
 public:
  using Eval = std::function<Complex(const VecN&, const VecN&)>;
  using MultiplierFn = std::function<Complex(const VecN&)>;

  Symbol(Eval f, double order, SymbolClass cls) : eval_(std::move(f)), order_(order), class_(cls) {}

  /// x-independent symbol m(xi).
  static Symbol multiplier(MultiplierFn m, double order) {
    Symbol s([m](const VecN&, const VecN& xi) { return m(xi); }, order, SymbolClass::multiplier);
    s.multiplier_ = std::move(m);
    return s;
  }

  static Symbol constant(Complex c) {
    return multiplier([c](const VecN&) { return c; }, 0.0);
  }

  Complex operator()(const VecN& x, const VecN& xi) const { return eval_(x, xi); }
  double order() const { return order_; }
  SymbolClass symbol_class() const { return class_; }
  bool is_multiplier() const { return static_cast<bool>(multiplier_); }
  const MultiplierFn& multiplier_fn() const { return multiplier_; }
  const Eval& eval() const { return eval_; }

  const std::shared_ptr<const SymbolTable>& table() const { return table_; }
  Symbol with_table(std::shared_ptr<const SymbolTable> t) const {
    Symbol s = *this;
    s.table_ = std::move(t);
    return s;
  }

  /// a(x_row, xi_m) for m in [c0, c1), from the table when it matches the grid.
  void fill(const Grid& g, std::size_t row, std::size_t c0, std::size_t c1, Complex* out) const {
    if (table_ && table_->grid == g) {
      std::copy(table_->values.begin() + row * g.size() + c0, table_->values.begin() + row * g.size() + c1, out);
      return;
    }
    if (multiplier_) {
      for (std::size_t m = c0; m < c1; ++m) out[m - c0] = multiplier_(g.frequency(m));
      return;
    }
    const VecN x = g.point(row);
    for (std::size_t m = c0; m < c1; ++m) out[m - c0] = eval_(x, g.frequency(m));
  }

 private:
  Eval eval_;
  double order_;
  SymbolClass class_;
  MultiplierFn multiplier_;
  std::shared_ptr<const SymbolTable> table_;
};

/// chi(|xi|) f(P(x, A_h xi), x, xi).
template <class F>
Symbol projection_class_symbol(const Signature& sig, double order, F f) {
  return Symbol(
      [sig, f](const VecN& x, const VecN& xi) -> Complex {
        const double c = cutoff_chi(xi.norm());
        if (c == 0.0) return {};
        return c * f(projection(x, sig.apply(xi)), x, xi);
      },
      order, SymbolClass::projection_class);
}

/// Index of the lattice frequency -xi_m, or nullopt when it falls outside the lattice
/// (Nyquist components).
inline std::optional<std::size_t> negated_frequency(const Grid& g, std::size_t m) {
  auto modes = g.modes(m);
  for (int d = 0; d < g.dim(); ++d) {
    modes[d] = -modes[d];
    if (modes[d] >= g.points() / 2) return std::nullopt;
  }
  return g.frequency_index(modes);
}

/// p_e(x, xi) = (p(x, xi) + p(x, -xi)) / 2, exactly even by construction.
inline Symbol even_part(const Symbol& p) {
  auto f = p.eval();
  if (p.is_multiplier()) {
    auto m = p.multiplier_fn();
    return Symbol::multiplier([m](const VecN& xi) { return 0.5 * (m(xi) + m(-xi)); }, p.order());
  }
  Symbol out([f](const VecN& x, const VecN& xi) { return 0.5 * (f(x, xi) + f(x, -xi)); }, p.order(),
             p.symbol_class());
  if (const auto& t = p.table()) {
    auto e = std::make_shared<SymbolTable>(t->grid);
    const Grid& g = t->grid;
    for (std::size_t m = 0; m < g.size(); ++m) {
      const auto neg = negated_frequency(g, m);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const Complex other = neg ? t->at(j, *neg) : f(g.point(j), -g.frequency(m));
        e->at(j, m) = 0.5 * (t->at(j, m) + other);
      }
    }
    out = out.with_table(std::move(e));
  }
  return out;
}

/// Pointwise map of a symbol, carried through any attached table.
template <class F>
Symbol map_symbol(const Symbol& p, F fn, double order) {
  if (p.is_multiplier()) {
    auto m = p.multiplier_fn();
    return Symbol::multiplier([m, fn](const VecN& xi) { return fn(m(xi)); }, order);
  }
  auto f = p.eval();
  Symbol out([f, fn](const VecN& x, const VecN& xi) { return fn(f(x, xi)); }, order, p.symbol_class());
  if (const auto& t = p.table()) {
    auto e = std::make_shared<SymbolTable>(t->grid);
    for (std::size_t i = 0; i < t->values.size(); ++i) e->values[i] = fn(t->values[i]);
    out = out.with_table(std::move(e));
  }
  return out;
}

namespace detail {

// Nested central differences of f along the listed directions (0..n-1 = x, n..2n-1 = xi).
inline Complex nested_difference(const Symbol& a, const VecN& x, const VecN& xi, const std::vector<int>& axes,
                                 std::size_t depth, double hx, double hxi) {
  if (depth == axes.size()) return a(x, xi);
  const int n = static_cast<int>(x.size());
  const int ax = axes[depth];
  VecN xp = x, xm = x, ep = xi, em = xi;
  double h;
  if (ax < n) {
    h = hx;
    xp(ax) += h;
    xm(ax) -= h;
  } else {
    h = hxi;
    ep(ax - n) += h;
    em(ax - n) -= h;
  }
  return (nested_difference(a, xp, ep, axes, depth + 1, hx, hxi) -
          nested_difference(a, xm, em, axes, depth + 1, hx, hxi)) /
         (2.0 * h);
}

inline std::vector<int> expand_multi_index(const std::vector<int>& beta, const std::vector<int>& gamma, int n) {
  std::vector<int> axes;
  for (int j = 0; j < static_cast<int>(beta.size()); ++j)
    for (int c = 0; c < beta[j]; ++c) axes.push_back(j);
  for (int j = 0; j < static_cast<int>(gamma.size()); ++j)
    for (int c = 0; c < gamma[j]; ++c) axes.push_back(n + j);
  return axes;
}

}  // namespace detail

/// d_x^beta of a symbol by nested central differences; order unchanged.
inline Symbol derivative_symbol(const Symbol& a, const std::vector<int>& beta, double hx = 1e-3) {
  Symbol base = a.with_table(nullptr);
  return Symbol(
      [base, beta, hx](const VecN& x, const VecN& xi) {
        const auto axes = detail::expand_multi_index(beta, {}, static_cast<int>(x.size()));
        return detail::nested_difference(base, x, xi, axes, 0, hx, hx);
      },
      a.order(), a.symbol_class());
}

struct SeminormOptions {
  std::uint64_t seed = 0;
  double x_radius = 5.0;
  double xi_max = 50.0;
  double hx = 1e-3;
  double hxi_rel = 1e-3;  ///< xi step relative to <xi>
};

/// max over samples of |<P(x, A_h xi)>^mu d_x^beta d_xi^gamma a| / <xi>^{m - |gamma|}.
/// Multi-index entries are limited to 3 (finite-difference depth).
inline double seminorm_estimate(const Symbol& sym, const Signature& sig, double mu, const std::vector<int>& beta,
                                const std::vector<int>& gamma, std::size_t sample_budget,
                                const SeminormOptions& opt = {}) {
  const int n = sig.dim();
  for (int b : beta)
    if (b < 0 || b > 3) throw PreconditionError("seminorm_estimate: beta entries must lie in [0, 3]");
  for (int g : gamma)
    if (g < 0 || g > 3) throw PreconditionError("seminorm_estimate: gamma entries must lie in [0, 3]");
  if (static_cast<int>(beta.size()) > n || static_cast<int>(gamma.size()) > n)
    throw PreconditionError("seminorm_estimate: multi-index longer than the dimension");
  const auto axes = detail::expand_multi_index(beta, gamma, n);
  int gabs = 0;
  for (int g : gamma) gabs += g;
  const HaltonSequence seq(2 * n, opt.seed);
  double best = 0.0;
  for (std::size_t s = 0; s < sample_budget; ++s) {
    const auto q = seq.point(s);
    VecN x(n), xi(n);
    for (int d = 0; d < n; ++d) {
      x(d) = opt.x_radius * (2.0 * q[d] - 1.0);
      xi(d) = opt.xi_max * (2.0 * q[n + d] - 1.0);
    }
    const double br = bracket(xi);
    const Complex v = detail::nested_difference(sym, x, xi, axes, 0, opt.hx, opt.hxi_rel * br);
    double w = std::pow(br, gabs - sym.order());
    if (mu != 0.0 && xi.norm() > 0.0) w *= std::pow(bracket(projection(x, sig.apply(xi))), mu);
    best = std::max(best, std::abs(v) * w);
  }
  return best;
}

}  // namespace uhs
