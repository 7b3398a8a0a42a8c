#pragma once

#include "uhs/core/coefficients.hpp"
#include "uhs/core/quasirandom.hpp"

#include <variant>

namespace uhs {

/// Measured structural constants of a coefficient model.
struct HypothesisReport {
  double gamma_r0 = 1.0;          ///< min over samples of min(sigma_min(A), 1/sigma_max(A))
  double flatness_margin = 0.0;   ///< sup <x>^N |a - A_h|
  double growth_margin = 0.0;     ///< sup <x>^N |b_m|, m = 1, 2
  std::vector<double> flatness_by_order;  ///< index = |alpha|
  std::vector<double> growth_by_order;
  double time_margin = 0.0;       ///< sup <x>^N |d_t a| + |d_t b|
  std::size_t samples = 0;
  int derivative_order = 0;       ///< highest |alpha| differenced
};

struct HypothesisOptions {
  std::uint64_t seed = 0;
  double t_max = 1.0;
  /// Half width of the sampled x-box; defaults to 1.05 * flat_radius.
  double x_radius = 0.0;
};

namespace detail {

inline double fd_step(const VecN& x) { return 1e-4 * (1.0 + x.norm()); }

// Entrywise max of |d^alpha F| over all |alpha| == order, by nested central differences.
template <class F>
double max_derivative(F&& f, const VecN& x, int order) {
  if (order == 0) return f(x);
  const int n = static_cast<int>(x.size());
  const double h = fd_step(x);
  double best = 0.0;
  if (order == 1) {
    for (int l = 0; l < n; ++l) {
      VecN xp = x, xm = x;
      xp(l) += h;
      xm(l) -= h;
      best = std::max(best, f.diff1(xp, xm, h));
    }
    return best;
  }
  for (int l = 0; l < n; ++l)
    for (int m = l; m < n; ++m) best = std::max(best, f.diff2(x, l, m, h));
  return best;
}

// Helper that evaluates a matrix- or vector-valued map and reduces differences by max-abs.
template <class Eval>
struct EntryDiff {
  Eval eval;

  double operator()(const VecN& x) const { return eval(x).cwiseAbs().maxCoeff(); }
  double diff1(const VecN& xp, const VecN& xm, double h) const {
    return ((eval(xp) - eval(xm)) / (2.0 * h)).cwiseAbs().maxCoeff();
  }
  double diff2(const VecN& x, int l, int m, double h) const {
    auto shift = [&](double dl, double dm) {
      VecN y = x;
      y(l) += dl;
      y(m) += dm;
      return eval(y);
    };
    if (l == m) return ((shift(h, 0) - 2.0 * eval(x) + shift(-h, 0)) / (h * h)).cwiseAbs().maxCoeff();
    return ((shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)).cwiseAbs().maxCoeff();
  }
};

template <class Eval>
EntryDiff<Eval> entry_diff(Eval e) {
  return {std::move(e)};
}

}  // namespace detail

/// Samples D_{r0} quasi-randomly and measures non-degeneracy, flatness and growth constants.
/// The origin (x = 0, t = 0, z = 0) is always included as an anchor sample.
inline HypothesisReport check_hypotheses(const CoefficientModel& model, double r0, std::size_t sample_budget,
                                         const HypothesisOptions& opts = {}) {
  if (sample_budget < 1000) throw PreconditionError("check_hypotheses: sample_budget must be >= 1000");
  if (!(r0 > 0.0)) throw PreconditionError("check_hypotheses: r0 must be positive");
  if (model.quasilinear() && r0 > model.r0())
    throw ConfigError("check_hypotheses: requested r0 exceeds the model's admissible ball");
  const int n = model.dim();
  const bool quasi = model.quasilinear();
  const int dims = n + 1 + (quasi ? 2 * (n + 1) : 0);
  const HaltonSequence seq(dims, opts.seed);
  const double xr = opts.x_radius > 0.0 ? opts.x_radius : 1.05 * model.flat_radius();
  const int order = std::min(model.derivative_budget(), 2);
  const MatN ah = model.signature().matrix();
  const int big_n = model.decay_exponent();

  HypothesisReport rep;
  rep.flatness_by_order.assign(order + 1, 0.0);
  rep.growth_by_order.assign(order + 1, 0.0);
  rep.derivative_order = order;
  rep.gamma_r0 = std::numeric_limits<double>::infinity();

  auto disk = [r0](double a, double b) { return std::polar(r0 * std::sqrt(a), 2.0 * kPi * b); };

  for (std::size_t s = 0; s <= sample_budget; ++s) {
    VecN x = VecN::Zero(n);
    double t = 0.0;
    ZState z = ZState::zero(n);
    if (s > 0) {
      const auto p = seq.point(s - 1);
      for (int d = 0; d < n; ++d) x(d) = xr * (2.0 * p[d] - 1.0);
      t = opts.t_max * p[n];
      if (quasi) {
        z.u = disk(p[n + 1], p[n + 2]);
        z.u_bar = std::conj(z.u);
        for (int j = 0; j < n; ++j) {
          z.grad(j) = disk(p[n + 3 + 2 * j], p[n + 4 + 2 * j]);
          z.grad_bar(j) = std::conj(z.grad(j));
        }
      }
    }

    const MatN a = model.a(x, t, quasi ? &z : nullptr);
    Eigen::SelfAdjointEigenSolver<MatN> eig(a, Eigen::EigenvaluesOnly);
    const auto ev = eig.eigenvalues().cwiseAbs();
    const double smin = ev.minCoeff(), smax = ev.maxCoeff();
    if (smin <= 1e-12 * std::max(1.0, smax))
      throw NonDegeneracyError("check_hypotheses: singular coefficient matrix at sample " + std::to_string(s), x);
    rep.gamma_r0 = std::min({rep.gamma_r0, smin, 1.0 / smax});

    const double w = std::pow(bracket(x), big_n);
    auto a_dev = detail::entry_diff([&](const VecN& y) { return MatN(model.a(y, t) - ah); });
    auto b_all = detail::entry_diff([&](const VecN& y) {
      Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxDim, 1> v(2 * n);
      const CVecN b1 = model.b1(y, t), b2 = model.b2(y, t);
      for (int j = 0; j < n; ++j) {
        v(j) = std::abs(b1(j));
        v(n + j) = std::abs(b2(j));
      }
      return v;
    });
    // |b| is not smooth at zeros of b; difference the complex components instead for |alpha| > 0.
    auto b_cplx = detail::entry_diff([&](const VecN& y) {
      Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, 2 * kMaxDim, 1> v(2 * n);
      const CVecN b1 = model.b1(y, t), b2 = model.b2(y, t);
      for (int j = 0; j < n; ++j) {
        v(j) = b1(j);
        v(n + j) = b2(j);
      }
      return v;
    });
    for (int o = 0; o <= order; ++o) {
      rep.flatness_by_order[o] = std::max(rep.flatness_by_order[o], w * detail::max_derivative(a_dev, x, o));
      const double gb = o == 0 ? detail::max_derivative(b_all, x, 0) : detail::max_derivative(b_cplx, x, o);
      rep.growth_by_order[o] = std::max(rep.growth_by_order[o], w * gb);
    }
    if (model.time_dependent()) {
      const double ht = 1e-4 * (1.0 + t);
      const double dta = ((model.a(x, t + ht) - model.a(x, t - ht)) / (2.0 * ht)).cwiseAbs().maxCoeff();
      const double dtb = ((model.b1(x, t + ht) - model.b1(x, t - ht)) / (2.0 * ht)).cwiseAbs().maxCoeff() +
                         ((model.b2(x, t + ht) - model.b2(x, t - ht)) / (2.0 * ht)).cwiseAbs().maxCoeff();
      rep.time_margin = std::max(rep.time_margin, w * (dta + dtb));
    }
    ++rep.samples;
  }
  rep.flatness_margin = rep.flatness_by_order[0];
  rep.growth_margin = rep.growth_by_order[0];
  return rep;
}

using CMatN = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

struct Proportional {
  Complex lambda;
};

struct NullConeWitness {
  VecN xi;               ///< unit vector
  double a_form;         ///< <A xi, xi>
  Complex b_form;        ///< <B xi, xi>
};

/// Neither certificate met the tolerance (B is within tolerance noise of a multiple of A).
struct Inconclusive {
  Complex lambda;
  double residual;
  double best_witness;
};

using ProportionalityVerdict = std::variant<Proportional, NullConeWitness, Inconclusive>;

/// Decides whether B = lambda A, or exhibits a null vector of A on which B's form is non-zero.
/// Witnesses are searched on the null cone written in A's eigenbasis: pairs (p+, q-) and
/// triples inside one sign block, which together detect every entry of Q^T B Q.
inline ProportionalityVerdict proportionality_check(const MatN& a, const CMatN& b, double tol) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n || b.cols() != n)
    throw PreconditionError("proportionality_check: A and B must be square of equal size");
  Eigen::SelfAdjointEigenSolver<MatN> eig(a);
  const auto& ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  std::vector<int> pos, neg;
  for (int i = 0; i < n; ++i) {
    if (std::abs(ev(i)) <= 1e-12 * std::max(scale, 1e-300))
      throw PreconditionError("proportionality_check: A is degenerate");
    (ev(i) > 0 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty())
    throw PreconditionError("proportionality_check: A is definite, its null cone is trivial");

  const Complex lambda = (a.cast<Complex>().cwiseProduct(b)).sum() / a.squaredNorm();
  const double bnorm = b.norm();
  const double residual = (b - lambda * a.cast<Complex>()).norm();
  if (bnorm == 0.0) return Proportional{Complex{}};
  if (residual <= tol * bnorm) return Proportional{lambda};

  const MatN& q = eig.eigenvectors();
  NullConeWitness best{VecN::Zero(n), 0.0, Complex{}};
  auto consider = [&](const VecN& eta) {
    VecN xi = q * eta;
    xi /= xi.norm();
    const double af = xi.dot(a * xi);
    const Complex bf = (xi.cast<Complex>().transpose() * b * xi.cast<Complex>())(0, 0);
    if (std::abs(af) <= tol && std::abs(bf) > std::abs(best.b_form)) best = {xi, af, bf};
  };
  auto scaled = [&](int i, double weight) { return weight / std::sqrt(std::abs(ev(i))); };
  for (int p : pos)
    for (int m : neg)
      for (double sgn : {1.0, -1.0}) {
        VecN eta = VecN::Zero(n);
        eta(p) = scaled(p, 1.0);
        eta(m) = sgn * scaled(m, 1.0);
        consider(eta);
      }
  auto triples = [&](const std::vector<int>& block, const std::vector<int>& other) {
    for (std::size_t i = 0; i < block.size(); ++i)
      for (std::size_t j = i + 1; j < block.size(); ++j)
        for (int m : other)
          for (double sgn : {1.0, -1.0}) {
            VecN eta = VecN::Zero(n);
            eta(block[i]) = scaled(block[i], std::sqrt(0.5));
            eta(block[j]) = sgn * scaled(block[j], std::sqrt(0.5));
            eta(m) = scaled(m, 1.0);
            consider(eta);
          }
  };
  triples(pos, neg);
  triples(neg, pos);
  if (std::abs(best.b_form) > tol) return best;
  return Inconclusive{lambda, residual, std::abs(best.b_form)};
}

}  // namespace uhs
