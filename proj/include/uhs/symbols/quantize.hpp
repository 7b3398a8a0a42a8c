#pragma once

#include "uhs/core/field.hpp"
#include "uhs/symbols/symbol.hpp"

#include <random>

namespace uhs {

enum class ApplyMode { dense, chunked };

struct PlanOptions {
  ApplyMode mode = ApplyMode::dense;
  std::size_t chunk_size = 4096;
  unsigned jobs = 1;
  /// Route x-independent symbols through the FFT instead of the direct sum.
  bool fft_multipliers = true;
  /// Dense mode stores the full symbol table when it has at most this many entries.
  std::size_t materialize_limit = std::size_t{1} << 22;
};

/// Discrete Kohn-Nirenberg quantization on a grid:
///   c_m = M^{-n} sum_x u(x) e^{-i x.xi_m},  (Psi_a u)(x) = sum_m e^{i x.xi_m} a(x, xi_m) c_m.
class QuantizationPlan {
 public:
  QuantizationPlan(Grid grid, Symbol symbol, PlanOptions opt = {})
      : grid_(std::move(grid)), symbol_(std::move(symbol)), opt_(opt) {
    if (opt_.chunk_size == 0) throw ConfigError("quantization: chunk_size must be positive");
    const int m = grid_.points();
    phase_.resize(static_cast<std::size_t>(m) * m);
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        // x_j xi_k = -pi k' + 2 pi j k' / M with k' the signed mode; reduce before exp.
        const int km = grid_.mode(k);
        const long long prod = static_cast<long long>(j) * km;
        const double frac = static_cast<double>(((prod % m) + m) % m) / m;
        const double ang = 2.0 * kPi * frac - kPi * km;
        phase_[static_cast<std::size_t>(j) * m + k] = std::polar(1.0, ang);
      }
    const std::size_t size = grid_.size();
    axis_index_.assign(static_cast<std::size_t>(grid_.dim()) * size, 0);
    for (std::size_t f = 0; f < size; ++f) {
      const auto idx = grid_.unravel(f);
      for (int d = 0; d < grid_.dim(); ++d) axis_index_[d * size + f] = static_cast<std::uint32_t>(idx[d]);
    }
    if (symbol_.is_multiplier()) {
      multiplier_.resize(size);
      for (std::size_t k = 0; k < size; ++k) multiplier_[k] = symbol_.multiplier_fn()(grid_.frequency(k));
    }
    if (opt_.mode == ApplyMode::dense && !fast_path() && size * size <= opt_.materialize_limit) {
      auto t = std::make_shared<SymbolTable>(grid_);
      parallel_for(
          size, [&](std::size_t j) { symbol_.fill(grid_, j, 0, size, t->values.data() + j * size); }, opt_.jobs);
      dense_ = std::move(t);
    }
  }

  const Grid& grid() const { return grid_; }
  const Symbol& symbol() const { return symbol_; }
  ApplyMode mode() const { return opt_.mode; }
  std::size_t chunk_size() const { return opt_.chunk_size; }
  const PlanOptions& options() const { return opt_; }
  bool fast_path() const { return opt_.fft_multipliers && symbol_.is_multiplier(); }

  /// e^{i x_row . xi_m} for m in [c0, c1).
  void phase_row(std::size_t row, std::size_t c0, std::size_t c1, Complex* out) const {
    const auto xi = grid_.unravel(row);
    const std::size_t m = grid_.points(), size = grid_.size();
    const int n = grid_.dim();
    const Complex* p0 = phase_.data() + xi[0] * m;
    const std::uint32_t* a0 = axis_index_.data();
    for (std::size_t k = c0; k < c1; ++k) out[k - c0] = p0[a0[k]];
    for (int d = 1; d < n; ++d) {
      const Complex* pd = phase_.data() + xi[d] * m;
      const std::uint32_t* ad = axis_index_.data() + d * size;
      for (std::size_t k = c0; k < c1; ++k) out[k - c0] = mul(out[k - c0], pd[ad[k]]);
    }
  }

  /// Symbol values for one row and column range.
  void symbol_row(std::size_t row, std::size_t c0, std::size_t c1, Complex* out) const {
    if (dense_) {
      std::copy(dense_->values.begin() + row * grid_.size() + c0, dense_->values.begin() + row * grid_.size() + c1,
                out);
      return;
    }
    if (!multiplier_.empty()) {
      std::copy(multiplier_.begin() + c0, multiplier_.begin() + c1, out);
      return;
    }
    symbol_.fill(grid_, row, c0, c1, out);
  }

  const std::vector<Complex>& multiplier_values() const { return multiplier_; }

  static Complex mul(Complex a, Complex b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
  }

 private:
  Grid grid_;
  Symbol symbol_;
  PlanOptions opt_;
  std::vector<Complex> phase_;              // M x M, e^{i x_j xi_k} in one axis
  std::vector<std::uint32_t> axis_index_;   // n x M^n per-axis indices of each flat index
  std::vector<Complex> multiplier_;
  std::shared_ptr<const SymbolTable> dense_;
};

namespace detail {

inline void check_grid(const QuantizationPlan& plan, const ComplexField& f) {
  if (!(f.grid() == plan.grid())) throw ConfigError("quantization: field grid does not match the plan grid");
}

// Raw DFT coefficients c_m = M^{-n} sum_x u(x) e^{-i x.xi_m} = (2L)^{-n/2} * unitary spectrum.
inline std::vector<Complex> dft_coefficients(const ComplexField& u) {
  const Grid& g = u.grid();
  std::vector<Complex> c = u.spectrum();
  const double s = std::pow(2.0 * g.half_width(), -0.5 * g.dim());
  for (auto& z : c) z *= s;
  return c;
}

// Inverse of dft_coefficients' adjoint: out(x) = M^{-n} sum_m e^{i x.xi_m} d_m.
inline std::vector<Complex> synthesize_adjoint(const Grid& g, std::vector<Complex> d) {
  const double s = std::pow(2.0 * g.half_width(), 0.5 * g.dim()) / static_cast<double>(g.size());
  for (auto& z : d) z *= s;
  return inverse_unitary(g, d);
}

}  // namespace detail

/// Psi_a applied to several fields at once; each symbol entry is formed once and reused.
inline std::vector<ComplexField> quantize_apply(const QuantizationPlan& plan, const std::vector<ComplexField>& us) {
  for (const auto& u : us) detail::check_grid(plan, u);
  const Grid& g = plan.grid();
  std::vector<ComplexField> result;
  if (plan.fast_path()) {
    const auto& mv = plan.multiplier_values();
    for (const auto& u : us) {
      std::vector<Complex> spec = u.spectrum();
      for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= mv[k];
      result.emplace_back(g, detail::inverse_unitary(g, spec));
    }
    return result;
  }
  const std::size_t nb = us.size(), size = g.size();
  if (nb == 0) return result;
  // Coefficients interleaved by field: c[k * nb + q].
  std::vector<Complex> c(size * nb);
  for (std::size_t q = 0; q < nb; ++q) {
    const auto cq = detail::dft_coefficients(us[q]);
    for (std::size_t k = 0; k < size; ++k) c[k * nb + q] = cq[k];
  }
  std::vector<Complex> out(size * nb);
  const bool chunked = plan.mode() == ApplyMode::chunked;
  const std::size_t chunk = chunked ? std::min(plan.chunk_size(), size) : size;
  parallel_for(
      size,
      [&](std::size_t j) {
        std::vector<Complex> ph(chunk), a(chunk);
        std::vector<double> tr(nb, 0.0), ti(nb, 0.0);
        for (std::size_t c0 = 0; c0 < size; c0 += chunk) {
          const std::size_t c1 = std::min(size, c0 + chunk);
          plan.phase_row(j, c0, c1, ph.data());
          plan.symbol_row(j, c0, c1, a.data());
          if (nb == 1) {
            double sr = 0.0, si = 0.0;
            for (std::size_t k = c0; k < c1; ++k) {
              const Complex z = QuantizationPlan::mul(QuantizationPlan::mul(ph[k - c0], a[k - c0]), c[k]);
              sr += z.real();
              si += z.imag();
            }
            tr[0] += sr;
            ti[0] += si;
            continue;
          }
          for (std::size_t k = c0; k < c1; ++k) {
            const Complex w = QuantizationPlan::mul(ph[k - c0], a[k - c0]);
            const Complex* ck = c.data() + k * nb;
            for (std::size_t q = 0; q < nb; ++q) {
              tr[q] += w.real() * ck[q].real() - w.imag() * ck[q].imag();
              ti[q] += w.real() * ck[q].imag() + w.imag() * ck[q].real();
            }
          }
        }
        for (std::size_t q = 0; q < nb; ++q) out[j * nb + q] = {tr[q], ti[q]};
      },
      plan.options().jobs);
  for (std::size_t q = 0; q < nb; ++q) {
    std::vector<Complex> v(size);
    for (std::size_t j = 0; j < size; ++j) v[j] = out[j * nb + q];
    result.emplace_back(g, std::move(v));
  }
  return result;
}

/// Psi_a u.
inline ComplexField quantize_apply(const QuantizationPlan& plan, const ComplexField& u) {
  return std::move(quantize_apply(plan, std::vector<ComplexField>{u}).front());
}

/// Exact discrete adjoint of quantize_apply with respect to the grid inner product, for
/// several fields at once.
inline std::vector<ComplexField> adjoint_apply(const QuantizationPlan& plan, const std::vector<ComplexField>& vs) {
  for (const auto& v : vs) detail::check_grid(plan, v);
  const Grid& g = plan.grid();
  std::vector<ComplexField> result;
  if (plan.fast_path()) {
    const auto& mv = plan.multiplier_values();
    for (const auto& v : vs) {
      std::vector<Complex> spec = v.spectrum();
      for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::conj(mv[k]);
      result.emplace_back(g, detail::inverse_unitary(g, spec));
    }
    return result;
  }
  const std::size_t nb = vs.size(), size = g.size();
  if (nb == 0) return result;
  const std::size_t chunk = plan.mode() == ApplyMode::chunked ? std::min(plan.chunk_size(), size) : size;
  const std::size_t blocks = (size + chunk - 1) / chunk;
  std::vector<std::vector<Complex>> d(nb, std::vector<Complex>(size));
  // Column blocks are independent, so each worker owns a disjoint slice of every d[q].
  parallel_for(
      blocks,
      [&](std::size_t b) {
        const std::size_t c0 = b * chunk, c1 = std::min(size, c0 + chunk);
        std::vector<Complex> ph(c1 - c0), a(c1 - c0);
        for (std::size_t j = 0; j < size; ++j) {
          bool any = false;
          for (const auto& v : vs) any = any || v.values()[j] != Complex{};
          if (!any) continue;
          plan.phase_row(j, c0, c1, ph.data());
          plan.symbol_row(j, c0, c1, a.data());
          for (std::size_t k = c0; k < c1; ++k) ph[k - c0] = std::conj(QuantizationPlan::mul(ph[k - c0], a[k - c0]));
          for (std::size_t q = 0; q < nb; ++q) {
            const Complex vj = vs[q].values()[j];
            if (vj == Complex{}) continue;
            Complex* dq = d[q].data();
            for (std::size_t k = c0; k < c1; ++k) dq[k] += QuantizationPlan::mul(ph[k - c0], vj);
          }
        }
      },
      plan.options().jobs);
  for (std::size_t q = 0; q < nb; ++q) result.emplace_back(g, detail::synthesize_adjoint(g, std::move(d[q])));
  return result;
}

inline ComplexField adjoint_apply(const QuantizationPlan& plan, const ComplexField& v) {
  return std::move(adjoint_apply(plan, std::vector<ComplexField>{v}).front());
}

/// Linear operator given by its action and the action of its adjoint.
struct LinearOperator {
  std::function<ComplexField(const ComplexField&)> apply;
  std::function<ComplexField(const ComplexField&)> adjoint;
};

/// E^R u = u - Psi_{k_minus}(Psi_{k_plus}^* u), and its adjoint.
inline LinearOperator compose_E_R(std::shared_ptr<const QuantizationPlan> k_plus,
                                  std::shared_ptr<const QuantizationPlan> k_minus) {
  if (!(k_plus->grid() == k_minus->grid())) throw ConfigError("compose_E_R: plans must share a grid");
  LinearOperator op;
  op.apply = [k_plus, k_minus](const ComplexField& u) {
    const auto w = quantize_apply(*k_minus, adjoint_apply(*k_plus, u));
    std::vector<Complex> out(u.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[i] - w[i];
    return ComplexField(u.grid(), std::move(out));
  };
  op.adjoint = [k_plus, k_minus](const ComplexField& v) {
    const auto w = quantize_apply(*k_plus, adjoint_apply(*k_minus, v));
    std::vector<Complex> out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] - w[i];
    return ComplexField(v.grid(), std::move(out));
  };
  return op;
}

struct NormEstimate {
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// ||T|| on the grid by power iteration on T^* T from a seeded random start.
inline NormEstimate operator_norm(const LinearOperator& op, const Grid& grid, std::uint64_t seed = 0,
                                  int max_iter = 60, double rel_tol = 1e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Complex> v(grid.size());
  for (auto& z : v) z = {g(rng), g(rng)};
  ComplexField x(grid, std::move(v));
  auto normalize = [](const ComplexField& f) {
    const double n = l2_norm(f);
    std::vector<Complex> w(f.values().begin(), f.values().end());
    for (auto& z : w) z /= n;
    return ComplexField(f.grid(), std::move(w));
  };
  x = normalize(x);
  NormEstimate est;
  double prev = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const auto tx = op.apply(x);
    const double nt = l2_norm(tx);
    est.norm = nt;
    est.iterations = it;
    if (nt == 0.0 || (prev >= 0.0 && std::abs(nt - prev) <= rel_tol * nt)) {
      est.converged = true;
      break;
    }
    prev = nt;
    const auto y = op.adjoint(tx);
    if (l2_norm(y) == 0.0) {
      est.converged = true;
      break;
    }
    x = normalize(y);
  }
  return est;
}

}  // namespace uhs
