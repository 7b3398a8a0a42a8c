#pragma once

#include "uhs/core/hypotheses.hpp"
#include "uhs/solver/spectral_ops.hpp"

#include <optional>

namespace uhs {

/// Coefficients sampled on the grid. a is stored as n*n planes, b as n planes.
struct CoefficientFields {
  int n = 0;
  std::vector<double> a;
  std::vector<Complex> b1, b2, c1, c2;
  bool has_b1 = false, has_b2 = false, has_c1 = false, has_c2 = false;

  const double* a_plane(int j, int k, std::size_t size) const { return a.data() + (j * n + k) * size; }
};

/// Evaluates the model on every grid point at time t; with z given, at the jet z[i].
/// Throws RangeError when a quasilinear coefficient is evaluated outside its ball.
inline CoefficientFields evaluate_coefficients(const CoefficientModel& model, const Grid& grid, double t,
                                               const std::vector<ZState>* z = nullptr) {
  const int n = model.dim();
  const std::size_t size = grid.size();
  CoefficientFields c;
  c.n = n;
  c.a.resize(static_cast<std::size_t>(n) * n * size);
  c.has_b1 = !model.b1_zero();
  c.has_b2 = !model.b2_zero();
  c.has_c1 = model.spec().params.count("c1_re") || model.spec().params.count("c1_im");
  c.has_c2 = model.spec().params.count("c2_re") || model.spec().params.count("c2_im");
  if (c.has_b1) c.b1.resize(n * size);
  if (c.has_b2) c.b2.resize(n * size);
  if (c.has_c1) c.c1.resize(size);
  if (c.has_c2) c.c2.resize(size);
  double worst = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const VecN x = grid.point(i);
    const ZState* zi = z ? &(*z)[i] : nullptr;
    MatN a;
    try {
      a = model.a(x, t, zi);
    } catch (const RangeError& e) {
      worst = std::max(worst, e.max_z());
      continue;
    }
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c.a[(j * n + k) * size + i] = a(j, k);
    if (c.has_b1) {
      const CVecN b = model.b1(x, t, zi);
      for (int j = 0; j < n; ++j) c.b1[j * size + i] = b(j);
    }
    if (c.has_b2) {
      const CVecN b = model.b2(x, t, zi);
      for (int j = 0; j < n; ++j) c.b2[j * size + i] = b(j);
    }
    if (c.has_c1) c.c1[i] = model.c1(x, t);
    if (c.has_c2) c.c2[i] = model.c2(x, t);
  }
  if (worst > 0.0) {
    std::ostringstream os;
    os << "coefficient evaluated outside the admissible ball: max |z| = " << worst << " > r0 = " << model.r0();
    throw RangeError(os.str(), worst);
  }
  return c;
}

/// Dealiased spectral discretization of
///   L u = -i d_j(a_jk d_k u) + b1.grad u + b2.grad conj(u) + c1 u + c2 conj(u).
/// Every product is formed from band-limited factors and projected back: D_j P(a_jk D_k P u),
/// so the principal part is exactly self-adjoint for real symmetric a.
class DiscreteOperator {
 public:
  explicit DiscreteOperator(const Grid& grid) : ops_(grid) {}

  const SpectralOps& ops() const { return ops_; }
  const Grid& grid() const { return ops_.grid(); }

  /// Dealiased values P u and gradients D_k P u on the grid.
  struct Jet {
    std::vector<Complex> u;
    std::vector<std::vector<Complex>> grad;
  };

  Jet jet(const std::vector<Complex>& u) const {
    const std::size_t size = ops_.size();
    const int n = grid().dim();
    std::vector<Complex> spec, tmp(size);
    ops_.forward(u, spec);
    const auto& mask = ops_.mask();
    for (std::size_t k = 0; k < size; ++k) spec[k] *= mask[k];
    Jet j;
    ops_.inverse(spec, j.u);
    j.grad.resize(n);
    for (int d = 0; d < n; ++d) {
      const double* xi = ops_.xi(d);
      for (std::size_t k = 0; k < size; ++k) tmp[k] = kI * xi[k] * spec[k];
      ops_.inverse(tmp, j.grad[d]);
    }
    return j;
  }

  static std::vector<ZState> z_states(const Jet& j) {
    const int n = static_cast<int>(j.grad.size());
    std::vector<ZState> z(j.u.size(), ZState::zero(n));
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i].u = j.u[i];
      z[i].u_bar = std::conj(j.u[i]);
      for (int d = 0; d < n; ++d) {
        z[i].grad(d) = j.grad[d][i];
        z[i].grad_bar(d) = std::conj(j.grad[d][i]);
      }
    }
    return z;
  }

  /// Spectrum of -i d_j P(a_jk D_k P u), or of the self-adjoint -d_j(a_jk d_k u) when
  /// self_adjoint_form is set, plus lower-order terms when requested.
  std::vector<Complex> apply_spectral(const CoefficientFields& c, const std::vector<Complex>& u, bool lower_order,
                                      bool self_adjoint_form = false) const {
    const std::size_t size = ops_.size();
    const int n = grid().dim();
    const Jet jt = jet(u);
    const auto& mask = ops_.mask();
    std::vector<Complex> out(size, Complex{}), w(size), ws;
    // -i D_j (w_j) has multiplier -i (i xi_j) = xi_j; -D_j(w_j) has -i xi_j.
    const Complex factor = self_adjoint_form ? -kI : Complex(1.0);
    for (int j = 0; j < n; ++j) {
      std::fill(w.begin(), w.end(), Complex{});
      for (int k = 0; k < n; ++k) {
        const double* a = c.a_plane(j, k, size);
        const auto& g = jt.grad[k];
        for (std::size_t i = 0; i < size; ++i) w[i] += a[i] * g[i];
      }
      ops_.forward(w, ws);
      const double* xi = ops_.xi(j);
      for (std::size_t k = 0; k < size; ++k) out[k] += factor * xi[k] * mask[k] * ws[k];
    }
    if (lower_order && (c.has_b1 || c.has_b2 || c.has_c1 || c.has_c2)) {
      std::fill(w.begin(), w.end(), Complex{});
      for (int j = 0; j < n; ++j) {
        const auto& g = jt.grad[j];
        if (c.has_b1)
          for (std::size_t i = 0; i < size; ++i) w[i] += c.b1[j * size + i] * g[i];
        if (c.has_b2)
          for (std::size_t i = 0; i < size; ++i) w[i] += c.b2[j * size + i] * std::conj(g[i]);
      }
      if (c.has_c1)
        for (std::size_t i = 0; i < size; ++i) w[i] += c.c1[i] * jt.u[i];
      if (c.has_c2)
        for (std::size_t i = 0; i < size; ++i) w[i] += c.c2[i] * std::conj(jt.u[i]);
      ops_.forward(w, ws);
      for (std::size_t k = 0; k < size; ++k) out[k] += mask[k] * ws[k];
    }
    return out;
  }

  std::vector<Complex> apply(const CoefficientFields& c, const std::vector<Complex>& u) const {
    std::vector<Complex> out;
    ops_.inverse(apply_spectral(c, u, true), out);
    return out;
  }

  /// The self-adjoint principal operator -d_j(a_jk d_k u).
  std::vector<Complex> principal(const CoefficientFields& c, const std::vector<Complex>& u) const {
    std::vector<Complex> out;
    ops_.inverse(apply_spectral(c, u, false, true), out);
    return out;
  }

 private:
  SpectralOps ops_;
};

/// Exact multiplier e^{-eps |xi|^4 dt}.
inline ComplexField viscosity_semigroup(const ComplexField& field, double epsilon, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("viscosity_semigroup: dt must be positive");
  if (epsilon == 0.0) return field;
  return apply_multiplier(field, [&](const VecN& xi) {
    const double x2 = xi.squaredNorm();
    return Complex(std::exp(-epsilon * x2 * x2 * dt));
  });
}

/// L(x, t) u with coefficients evaluated at the jet of z_source (quasilinear models) or at z = 0.
inline ComplexField apply_L(const CoefficientModel& model, double t, const ComplexField& u,
                            const ComplexField* z_source = nullptr) {
  const DiscreteOperator op(u.grid());
  std::optional<std::vector<ZState>> z;
  if (model.quasilinear() && z_source != nullptr) z = DiscreteOperator::z_states(op.jet(z_source->data()));
  const auto c = evaluate_coefficients(model, u.grid(), t, z ? &*z : nullptr);
  return {u.grid(), op.apply(c, u.data())};
}

/// L with every coefficient taken at z = 0.
inline ComplexField apply_L_linearized(const CoefficientModel& model, double t, const ComplexField& u) {
  return apply_L(model, t, u, nullptr);
}

/// |Re i<Lu, u>| / (||Lu|| ||u||) for the principal operator -d_j(a_jk d_k .) at time t.
inline double self_adjoint_residual(const DiscreteOperator& op, const CoefficientFields& c,
                                    const std::vector<Complex>& u) {
  const auto lu = op.principal(c, u);
  const double cv = op.grid().cell_volume();
  const Complex ip = inner(std::span<const Complex>(lu), std::span<const Complex>(u), cv);
  const double scale = l2_norm(lu, cv) * l2_norm(u, cv);
  return scale == 0.0 ? 0.0 : std::abs((kI * ip).real()) / scale;
}

enum class Scheme { imex_rk2, exponential_lawson };

inline std::string to_string(Scheme s) { return s == Scheme::imex_rk2 ? "imex_rk2" : "exponential_lawson"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "imex_rk2") return Scheme::imex_rk2;
  if (s == "exponential_lawson") return Scheme::exponential_lawson;
  throw ConfigError("solver: unknown scheme '" + s + "'");
}

struct SolverConfig {
  double epsilon = 1e-2;
  double dt = 1e-3;
  double T = 1.0;
  Scheme scheme = Scheme::imex_rk2;
  Grid grid{2, 128, 20.0};
  int record_every = 10;
  double stability_budget = 0.5;
  std::vector<double> sobolev_orders{1.0};
  /// (s, r) pairs tracked as ||<x>^r J^s u||.
  std::vector<std::pair<double, double>> weighted_pairs{{0.0, 1.0}};
  double ntilde = 2.0;       ///< weight exponent of the smoothing density
  double smoothing_s = 0.0;  ///< density is ||<x>^{-Ntilde/2} J^{s+1/2} u||^2
  bool store_snapshots = false;
  bool check_self_adjoint = false;
  double blowup_factor = 1e6;

  int steps() const { return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9))); }
  double step() const { return T / steps(); }

  /// dt * max |h2| over the dealiased band, with h2 sampled at z = 0 on the grid at t = 0 and T.
  double stability_number(const CoefficientModel& model) const {
    const SpectralOps ops(grid);
    double rho = 0.0;
    for (double t : {0.0, T})
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const MatN a = model.a(grid.point(i), t);
        Eigen::SelfAdjointEigenSolver<MatN> eig(a, Eigen::EigenvaluesOnly);
        rho = std::max(rho, eig.eigenvalues().cwiseAbs().maxCoeff());
      }
    return step() * rho * ops.band_xi2_max();
  }

  void validate(const CoefficientModel& model) const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("solver: epsilon must lie in (0, 1]");
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("solver: dt and T must be positive");
    if (record_every < 1) throw ConfigError("solver: record_every must be >= 1");
    if (model.dim() != grid.dim()) throw ConfigError("solver: model and grid dimensions differ");
    const double s = stability_number(model);
    if (s > stability_budget) {
      std::ostringstream os;
      os << "solver: dt * max|h2| = " << s << " exceeds the stability budget " << stability_budget;
      throw ConfigError(os.str());
    }
  }
};

enum class RunTermination { completed, norm_blowup, step_failure, range_exit };

inline std::string to_string(RunTermination t) {
  switch (t) {
    case RunTermination::completed: return "completed";
    case RunTermination::norm_blowup: return "norm_blowup";
    case RunTermination::step_failure: return "step_failure";
    case RunTermination::range_exit: return "range_exit";
  }
  return "unknown";
}

struct RecordRow {
  double t = 0.0;
  double l2 = 0.0;
  std::vector<double> sobolev;   ///< ||J^s u|| per configured s
  std::vector<double> weighted;  ///< ||<x>^r J^s u|| per configured pair
  double smoothing_density = 0.0;
  double smoothing_increment = 0.0;
  double kstar = std::numeric_limits<double>::quiet_NaN();
  double er = std::numeric_limits<double>::quiet_NaN();
  double laplacian = 0.0;
};

/// Optional per-record probe returning (||(K^R)^* u||, ||E^R u||).
using KEProbe = std::function<std::pair<double, double>(const ComplexField&)>;

struct RunRecord {
  SolverConfig config;
  std::string model_canonical;
  std::vector<RecordRow> rows;
  RunTermination termination = RunTermination::completed;
  std::string message;
  double end_time = 0.0;
  ComplexField final_state{Grid(1, 2, 1.0), std::vector<Complex>(2)};
  std::vector<ComplexField> snapshots;
  double max_self_adjoint_residual = 0.0;
  double max_stability_number = 0.0;
};

struct LinearProblem {
  const CoefficientModel* model;
  ComplexField u0;
  std::function<Complex(const VecN&, double)> forcing;  ///< empty: the model's forcing
};

struct QuasilinearProblem {
  const CoefficientModel* model;
  ComplexField u0;
  std::function<Complex(const VecN&, double)> forcing;
};

namespace detail {

inline bool all_finite(const std::vector<Complex>& v) {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline RecordRow make_row(const SolverConfig& cfg, const DiscreteOperator& op, double t, const ComplexField& u,
                          const KEProbe& probe) {
  RecordRow r;
  r.t = t;
  r.l2 = l2_norm(u);
  for (double s : cfg.sobolev_orders) r.sobolev.push_back(weighted_norm(u, s, 0.0));
  for (const auto& [s, w] : cfg.weighted_pairs) r.weighted.push_back(weighted_norm(u, s, w));
  const double d = weighted_norm(u, cfg.smoothing_s + 0.5, -0.5 * cfg.ntilde);
  r.smoothing_density = d * d;
  double lap = 0.0;
  const auto& spec = u.spectrum();
  const auto& x2 = op.ops().xi_squared();
  for (std::size_t k = 0; k < spec.size(); ++k) lap += x2[k] * x2[k] * std::norm(spec[k]);
  r.laplacian = std::sqrt(lap);
  if (probe) std::tie(r.kstar, r.er) = probe(u);
  return r;
}

// Shared time loop. `coeffs(t, u_step_start)` returns the coefficient fields used for a
// stage at time t; quasilinear callers freeze the jet at the step start.
template <class CoeffFn>
RunRecord run(const CoefficientModel& model, const ComplexField& u0,
              const std::function<Complex(const VecN&, double)>& forcing_in, const SolverConfig& cfg,
              CoeffFn&& coeffs, const KEProbe& probe) {
  if (!(u0.grid() == cfg.grid)) throw ConfigError("solver: initial field grid differs from the configured grid");
  cfg.validate(model);
  const Grid& g = cfg.grid;
  const DiscreteOperator op(g);
  const std::size_t size = g.size();
  const int steps = cfg.steps();
  const double dt = cfg.step();

  auto forcing = forcing_in ? forcing_in
                            : std::function<Complex(const VecN&, double)>(
                                  [&model](const VecN& x, double t) { return model.forcing(x, t); });
  const bool model_forcing = !forcing_in;
  const bool has_forcing = forcing_in || model.has_forcing();
  std::vector<Complex> f_cache;
  auto forcing_at = [&](double t) -> const std::vector<Complex>& {
    if (model_forcing && !f_cache.empty()) return f_cache;
    f_cache.resize(size);
    for (std::size_t i = 0; i < size; ++i) f_cache[i] = forcing(g.point(i), t);
    return f_cache;
  };

  std::vector<double> visc_half(size), visc_full(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double x4 = op.ops().xi_squared()[k] * op.ops().xi_squared()[k];
    visc_half[k] = std::exp(-cfg.epsilon * x4 * 0.5 * dt);
    visc_full[k] = std::exp(-cfg.epsilon * x4 * dt);
  }
  auto viscous = [&](const std::vector<Complex>& v, const std::vector<double>& m) {
    std::vector<Complex> s, out;
    op.ops().forward(v, s);
    for (std::size_t k = 0; k < size; ++k) s[k] *= m[k];
    op.ops().inverse(s, out);
    return out;
  };

  RunRecord rec;
  rec.config = cfg;
  rec.model_canonical = model.canonical();
  double f_scale = 0.0;
  if (has_forcing) f_scale = l2_norm(forcing_at(0.0), g.cell_volume()) * std::max(cfg.T, 1.0);
  const double threshold = cfg.blowup_factor * std::max({l2_norm(u0), f_scale, 1e-300});

  std::vector<Complex> u = u0.data();
  auto push_row = [&](double t, const std::vector<Complex>& v) {
    ComplexField f(g, v);
    RecordRow r = make_row(cfg, op, t, f, probe);
    if (!rec.rows.empty()) {
      const auto& p = rec.rows.back();
      r.smoothing_increment = 0.5 * (t - p.t) * (p.smoothing_density + r.smoothing_density);
    }
    rec.rows.push_back(std::move(r));
    if (cfg.store_snapshots) rec.snapshots.push_back(std::move(f));
  };
  push_row(0.0, u);

  auto rhs = [&](double t, const std::vector<Complex>& v, const CoefficientFields& c) {
    std::vector<Complex> out = op.apply(c, v);
    if (has_forcing) {
      const auto& f = forcing_at(t);
      for (std::size_t i = 0; i < size; ++i) out[i] += f[i];
    }
    return out;
  };

  rec.termination = RunTermination::completed;
  double t = 0.0;
  for (int step = 1; step <= steps; ++step) {
    t = (step - 1) * dt;
    std::vector<Complex> next(size);
    try {
      if (cfg.scheme == Scheme::imex_rk2) {
        // Strang: half viscosity, Heun on L u + f, half viscosity.
        const auto v0 = viscous(u, visc_half);
        const auto c0 = coeffs(t, v0);
        if (cfg.check_self_adjoint)
          rec.max_self_adjoint_residual = std::max(rec.max_self_adjoint_residual, self_adjoint_residual(op, c0, v0));
        const auto k1 = rhs(t, v0, c0);
        std::vector<Complex> v1(size);
        for (std::size_t i = 0; i < size; ++i) v1[i] = v0[i] + dt * k1[i];
        const auto c1 = coeffs(t + dt, v0);
        const auto k2 = rhs(t + dt, v1, c1);
        for (std::size_t i = 0; i < size; ++i) v1[i] = v0[i] + 0.5 * dt * (k1[i] + k2[i]);
        next = viscous(v1, visc_half);
      } else {
        // Lawson-Heun with the integrating factor e^{-eps Delta^2 dt}.
        const auto c0 = coeffs(t, u);
        if (cfg.check_self_adjoint)
          rec.max_self_adjoint_residual = std::max(rec.max_self_adjoint_residual, self_adjoint_residual(op, c0, u));
        const auto k1 = rhs(t, u, c0);
        std::vector<Complex> v1(size);
        for (std::size_t i = 0; i < size; ++i) v1[i] = u[i] + dt * k1[i];
        v1 = viscous(v1, visc_full);
        const auto c1 = coeffs(t + dt, u);
        const auto k2 = rhs(t + dt, v1, c1);
        std::vector<Complex> w(size);
        for (std::size_t i = 0; i < size; ++i) w[i] = u[i] + 0.5 * dt * k1[i];
        w = viscous(w, visc_full);
        for (std::size_t i = 0; i < size; ++i) next[i] = w[i] + 0.5 * dt * k2[i];
      }
    } catch (const RangeError& e) {
      rec.termination = RunTermination::range_exit;
      rec.message = e.what();
      break;
    }
    if (!all_finite(next)) {
      rec.termination = RunTermination::step_failure;
      rec.message = "non-finite value at step " + std::to_string(step);
      break;
    }
    u.swap(next);
    t = step * dt;
    const double nrm = l2_norm(u, g.cell_volume());
    if (nrm > threshold) {
      rec.termination = RunTermination::norm_blowup;
      rec.message = "norm exceeded blow-up threshold at t = " + std::to_string(t);
      push_row(t, u);
      break;
    }
    if (step % cfg.record_every == 0 || step == steps) push_row(t, u);
  }
  rec.end_time = t;
  if (rec.rows.back().t < t) push_row(t, u);
  rec.final_state = ComplexField(g, std::move(u));
  return rec;
}

}  // namespace detail

/// Linear epsilon-viscosity problem u_t = -eps Delta^2 u + L(x, t) u + f.
inline RunRecord solve_linear(const LinearProblem& p, const SolverConfig& cfg, const KEProbe& probe = {}) {
  const CoefficientModel& m = *p.model;
  if (m.quasilinear()) throw PreconditionError("solve_linear: model depends on the solution; use solve_quasilinear");
  check_hypotheses(m, 1.0, 1000);
  std::optional<CoefficientFields> frozen;
  if (!m.time_dependent()) frozen = evaluate_coefficients(m, cfg.grid, 0.0);
  auto coeffs = [&](double t, const std::vector<Complex>&) {
    return frozen ? *frozen : evaluate_coefficients(m, cfg.grid, t);
  };
  return detail::run(m, p.u0, p.forcing, cfg, coeffs, probe);
}

/// Quasilinear problem with stage-frozen coefficients: every stage of a step uses the jet of
/// the step's starting state. Leaving the admissible ball ends the run with range_exit.
inline RunRecord solve_quasilinear(const QuasilinearProblem& p, const SolverConfig& cfg, const KEProbe& probe = {}) {
  const CoefficientModel& m = *p.model;
  const DiscreteOperator op(cfg.grid);
  const std::vector<Complex>* cached_for = nullptr;
  std::vector<ZState> z;
  std::vector<Complex> last_start;
  auto coeffs = [&](double t, const std::vector<Complex>& start) {
    if (cached_for == nullptr || start != last_start) {
      last_start = start;
      z = DiscreteOperator::z_states(op.jet(start));
      cached_for = &last_start;
    }
    return evaluate_coefficients(m, cfg.grid, t, &z);
  };
  return detail::run(m, p.u0, p.forcing, cfg, coeffs, probe);
}

enum class ContinuationVerdict { within_theory, left_ball, blowup };

inline std::string to_string(ContinuationVerdict v) {
  switch (v) {
    case ContinuationVerdict::within_theory: return "within_theory";
    case ContinuationVerdict::left_ball: return "left_ball";
    case ContinuationVerdict::blowup: return "blowup";
  }
  return "unknown";
}

struct ContinuationReport {
  ContinuationVerdict verdict = ContinuationVerdict::within_theory;
  std::optional<double> exit_time;      ///< range exit or first threshold crossing
  std::optional<double> doubling_time;  ///< first t with lambda(t) >= 2 lambda(0)
  double lambda_max = 0.0;
};

/// lambda(t) = ||u||_{s,2} (first configured s) + first weighted norm.
inline double size_functional(const RecordRow& r) {
  double v = r.sobolev.empty() ? r.l2 : r.sobolev.front();
  if (!r.weighted.empty()) v += r.weighted.front();
  return v;
}

inline ContinuationReport continuation_monitor(const RunRecord& rec, double lambda_threshold) {
  ContinuationReport rep;
  if (rec.termination == RunTermination::norm_blowup || rec.termination == RunTermination::step_failure) {
    rep.verdict = ContinuationVerdict::blowup;
    rep.exit_time = rec.end_time;
  } else if (rec.termination == RunTermination::range_exit) {
    rep.verdict = ContinuationVerdict::left_ball;
    rep.exit_time = rec.end_time;
  }
  if (rec.rows.empty()) return rep;
  const double l0 = size_functional(rec.rows.front());
  for (const auto& r : rec.rows) {
    const double l = size_functional(r);
    rep.lambda_max = std::max(rep.lambda_max, l);
    if (!rep.doubling_time && l0 > 0.0 && l >= 2.0 * l0) rep.doubling_time = r.t;
    if (rep.verdict == ContinuationVerdict::within_theory && l > lambda_threshold) {
      rep.verdict = ContinuationVerdict::left_ball;
      rep.exit_time = r.t;
    }
  }
  return rep;
}

}  // namespace uhs
