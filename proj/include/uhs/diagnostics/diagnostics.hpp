#pragma once

#include "uhs/rays/escape.hpp"
#include "uhs/rays/flow.hpp"
#include "uhs/solver/solver.hpp"
#include "uhs/symbols/integrating_factor.hpp"
#include "uhs/symbols/quantize.hpp"

#include <map>

namespace uhs {

/// One measured inequality instance lhs <= C rhs.
struct EstimateReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::map<std::string, double> parameters;
  bool bounded = true;
  std::vector<std::string> notes;

  std::string verdict() const { return bounded ? "bounded" : "violated"; }
};

/// lhs / rhs with 0/0 = 0 and x/0 = inf.
inline double safe_ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

// --- smoothing functional ---------------------------------------------------------------

/// Composite trapezoid in t of ||<x>^{-Ntilde/2} J^s u(t)||_2^2 over snapshots spaced by dt.
inline double smoothing_functional(const std::vector<ComplexField>& snapshots, double dt, double s, double ntilde) {
  if (snapshots.size() < 2) throw PreconditionError("smoothing_functional: need at least two snapshots");
  if (!(dt > 0.0)) throw PreconditionError("smoothing_functional: snapshot interval must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const double w = weighted_norm(snapshots[i], s, -0.5 * ntilde);
    const double f = (i == 0 || i + 1 == snapshots.size()) ? 0.5 : 1.0;
    acc += f * w * w;
  }
  return acc * dt;
}

/// Same quadrature on a run's stored snapshots, which must be uniformly spaced.
inline double smoothing_functional(const RunRecord& rec, double s, double ntilde) {
  if (rec.snapshots.size() != rec.rows.size() || rec.rows.size() < 2)
    throw PreconditionError("smoothing_functional: run has fewer than two stored snapshots");
  const double dt = rec.rows[1].t - rec.rows[0].t;
  for (std::size_t i = 1; i < rec.rows.size(); ++i)
    if (std::abs(rec.rows[i].t - rec.rows[i - 1].t - dt) > 1e-9 * (1.0 + dt))
      throw PreconditionError("smoothing_functional: snapshots are not uniformly spaced");
  return smoothing_functional(rec.snapshots, dt, s, ntilde);
}

// --- local smoothing estimate -------------------------------------------------------------

enum class SmoothingRhs {
  forcing_l1,        ///< ||u0|| + int ||f(t)|| dt
  forcing_weighted,  ///< ||u0|| + (int ||<x>^{-Ntilde/2} J^{-1/2} f||^2 dt)^{1/2}
};

struct SmoothingCheckOptions {
  SmoothingRhs rhs = SmoothingRhs::forcing_l1;
  double uniformity = 0.2;  ///< allowed (max - min) / max of the ratio across the sweep
  int min_rows = 100;       ///< record_every is lowered so the time quadrature has this many intervals
};

struct SmoothingRun {
  double epsilon = 0.0;
  double sup_norm = 0.0;
  double smoothing = 0.0;  ///< int ||<x>^{-Ntilde/2} J^{1/2} u||^2 dt
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  RunTermination termination = RunTermination::completed;
};

struct SmoothingCheck {
  EstimateReport report;
  std::vector<SmoothingRun> runs;
};

inline double forcing_rhs(const LinearProblem& p, const SolverConfig& cfg, SmoothingRhs form) {
  const Grid& g = cfg.grid;
  const int nt = 64;
  double acc = 0.0;
  for (int i = 0; i <= nt; ++i) {
    const double t = cfg.T * i / nt;
    const ComplexField f = ComplexField::from_function(g, [&](const VecN& x) {
      return p.forcing ? p.forcing(x, t) : p.model->forcing(x, t);
    });
    const double w = (i == 0 || i == nt) ? 0.5 : 1.0;
    if (form == SmoothingRhs::forcing_l1) {
      acc += w * l2_norm(f);
    } else {
      const double v = weighted_norm(f, -0.5, -0.5 * cfg.ntilde);
      acc += w * v * v;
    }
  }
  acc *= cfg.T / nt;
  const double u0 = l2_norm(p.u0);
  return form == SmoothingRhs::forcing_l1 ? u0 + acc : u0 + std::sqrt(acc);
}

/// Scores one run from its record rows: sup_t ||u|| + (sum of smoothing increments)^{1/2}.
inline SmoothingRun smoothing_run(const std::vector<RecordRow>& rows, double epsilon, double rhs,
                                  RunTermination termination) {
  SmoothingRun r;
  r.epsilon = epsilon;
  r.termination = termination;
  for (const auto& row : rows) {
    r.sup_norm = std::max(r.sup_norm, row.l2);
    r.smoothing += row.smoothing_increment;
  }
  r.lhs = r.sup_norm + std::sqrt(r.smoothing);
  r.rhs = rhs;
  r.ratio = safe_ratio(r.lhs, r.rhs);
  return r;
}

/// Bounded when every run completed and the ratio is uniform across the sweep.
inline SmoothingCheck smoothing_verdict(std::vector<SmoothingRun> runs, const SolverConfig& ref,
                                        const SmoothingCheckOptions& opt = {}) {
  SmoothingCheck out;
  EstimateReport& rep = out.report;
  rep.name = "local_smoothing";
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (const auto& r : runs) {
    if (r.termination != RunTermination::completed) {
      rep.bounded = false;
      rep.notes.push_back("run eps=" + std::to_string(r.epsilon) + " ended with " + to_string(r.termination));
    }
    if (r.ratio >= rmax) {
      rmax = r.ratio;
      rep.lhs = r.lhs;
      rep.rhs = r.rhs;
    }
    rmin = std::min(rmin, r.ratio);
  }
  out.runs = std::move(runs);
  rep.ratio = rmax;
  const double variation = rmax > 0.0 ? (rmax - rmin) / rmax : 0.0;
  rep.parameters = {{"T", ref.T},
                    {"M", ref.grid.points()},
                    {"L", ref.grid.half_width()},
                    {"Ntilde", ref.ntilde},
                    {"ratio_min", rmin},
                    {"ratio_variation", variation},
                    {"uniformity_threshold", opt.uniformity},
                    {"rhs_form", opt.rhs == SmoothingRhs::forcing_l1 ? 0.0 : 1.0}};
  if (!(variation < opt.uniformity) || !std::isfinite(rmax)) rep.bounded = false;
  return out;
}

/// record_every that gives the time quadrature at least min_rows intervals.
inline int smoothing_record_every(const SolverConfig& cfg, int min_rows) {
  return std::max(1, std::min(cfg.record_every, cfg.steps() / min_rows));
}

/// Runs the viscosity sweep and compares sup_t ||u|| + (smoothing functional)^{1/2} with the data.
inline SmoothingCheck smoothing_estimate_check(const LinearProblem& p, const std::vector<SolverConfig>& sweep,
                                               const SmoothingCheckOptions& opt = {}) {
  if (sweep.empty()) throw PreconditionError("smoothing_estimate_check: empty sweep");
  for (const auto& c : sweep)
    if (c.T != sweep.front().T || !(c.grid == sweep.front().grid))
      throw PreconditionError("smoothing_estimate_check: configs must share the horizon and grid");
  std::vector<SmoothingRun> runs;
  for (SolverConfig cfg : sweep) {
    cfg.smoothing_s = 0.0;
    cfg.store_snapshots = false;
    cfg.record_every = smoothing_record_every(cfg, opt.min_rows);
    const RunRecord rec = solve_linear(p, cfg);
    runs.push_back(smoothing_run(rec.rows, cfg.epsilon, forcing_rhs(p, cfg, opt.rhs), rec.termination));
  }
  return smoothing_verdict(std::move(runs), sweep.front(), opt);
}

/// Largest Ichinose functional over rays launched from x = 0 in n_dirs directions, the
/// heuristic recorded next to smoothing ratios (large values go with ratio growth).
inline double ichinose_heuristic(const CoefficientModel& model, int n_dirs = 16, double r_max = 20.0) {
  if (model.b1_zero()) return 0.0;
  std::vector<IchinoseSample> samples;
  const int n = model.dim();
  for (int i = 0; i < n_dirs; ++i) {
    VecN w = VecN::Zero(n);
    const double th = 2.0 * kPi * i / n_dirs;
    if (n == 1) {
      w(0) = i % 2 ? -1.0 : 1.0;
    } else {
      w(0) = std::cos(th);
      w(1) = std::sin(th);
    }
    samples.push_back({VecN::Zero(n), w});
  }
  return ichinose_functional(model, samples, {r_max}, 1e-10).value;
}

// --- interpolation estimate ----------------------------------------------------------------

struct InterpolationNorms {
  double l2 = 0.0, grad = 0.0, lap = 0.0;
};

inline InterpolationNorms interpolation_norms(const ComplexField& v) {
  const auto& s = v.spectrum();
  const Grid& g = v.grid();
  double a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double x2 = g.frequency(k).squaredNorm();
    const double p = std::norm(s[k]);
    a += p;
    b += x2 * p;
    c += x2 * x2 * p;
  }
  return {std::sqrt(a), std::sqrt(b), std::sqrt(c)};
}

/// ||grad v|| ||lap v|| / (||v||^{1/2} ||lap v||^{3/2}); 0 for v = 0.
inline double interpolation_ratio(const ComplexField& v) {
  const auto n = interpolation_norms(v);
  return safe_ratio(n.grad * n.lap, std::sqrt(n.l2) * std::pow(n.lap, 1.5));
}

/// Verifies ||grad v|| ||lap v|| <= ||v||^{1/2} ||lap v||^{3/2} with constant 1 on every field.
inline EstimateReport interpolation_check(const std::vector<ComplexField>& fields) {
  EstimateReport rep;
  rep.name = "interpolation";
  std::size_t worst = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto n = interpolation_norms(fields[i]);
    const double lhs = n.grad * n.lap, rhs = std::sqrt(n.l2) * std::pow(n.lap, 1.5);
    const double r = safe_ratio(lhs, rhs);
    if (i == 0 || r > rep.ratio) {
      rep.ratio = r;
      rep.lhs = lhs;
      rep.rhs = rhs;
      worst = i;
    }
  }
  rep.parameters = {{"fields", static_cast<double>(fields.size())}, {"worst_index", static_cast<double>(worst)}};
  rep.bounded = rep.ratio <= 1.0 + 1e-12;
  return rep;
}

// --- K^R / E^R energy chain -----------------------------------------------------------------

struct KStarTrack {
  std::vector<double> t, l2, kstar, er, residual;
  double c_k = 0.0;  ///< measured norm of the left factor K~^R
  double k0 = 0.0;   ///< least-squares growth rate of log ||(K^R)^* u||^2
  EstimateReport report;
};

/// Plans for the operators built from an integrating factor on one grid.
struct KOperators {
  std::shared_ptr<const QuantizationPlan> k_plus, k_minus;
  LinearOperator e_r;
  double c_k = 0.0;

  KOperators(const IntegratingFactor& f, const Grid& g, const PlanOptions& opt = {}, std::uint64_t seed = 0)
      : k_plus(std::make_shared<QuantizationPlan>(g, f.k_plus, opt)),
        k_minus(std::make_shared<QuantizationPlan>(g, f.k_minus, opt)),
        e_r(compose_E_R(k_plus, k_minus)) {
    LinearOperator km{[this](const ComplexField& u) { return quantize_apply(*k_minus, u); },
                      [this](const ComplexField& v) { return adjoint_apply(*k_minus, v); }};
    c_k = operator_norm(km, g, seed).norm;
  }

  /// (||(K^R)^* u||, ||E^R u||), usable as a solver probe.
  std::pair<double, double> measure(const ComplexField& u) const {
    return {l2_norm(adjoint_apply(*k_plus, u)), l2_norm(e_r.apply(u))};
  }
};

/// Tracks ||(K^R)^* u||, ||E^R u|| and the reconstruction residual over a run's snapshots.
/// A null operator set means the symbol tables were never built.
inline KStarTrack kstar_energy_track(const RunRecord& rec, const KOperators* ops) {
  if (ops == nullptr)
    throw ConfigError("kstar_energy_track: no symbol tables for this run; run `uhs cache build` first");
  if (rec.snapshots.size() != rec.rows.size() || rec.snapshots.empty())
    throw PreconditionError("kstar_energy_track: run has no stored snapshots");
  KStarTrack tr;
  tr.c_k = ops->c_k;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
    const auto& u = rec.snapshots[i];
    const auto [k, e] = ops->measure(u);
    const double n = l2_norm(u);
    tr.t.push_back(rec.rows[i].t);
    tr.l2.push_back(n);
    tr.kstar.push_back(k);
    tr.er.push_back(e);
    tr.residual.push_back(n - e - tr.c_k * k);
    if (tr.residual.back() > worst) {
      worst = tr.residual.back();
      tr.report.lhs = n;
      tr.report.rhs = e + tr.c_k * k;
    }
  }
  // Slope of log ||K^* u||^2 against t.
  double st = 0, sy = 0, stt = 0, sty = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    if (!(tr.kstar[i] > 0.0)) continue;
    const double y = 2.0 * std::log(tr.kstar[i]);
    st += tr.t[i];
    sy += y;
    stt += tr.t[i] * tr.t[i];
    sty += tr.t[i] * y;
    ++cnt;
  }
  const double den = cnt * stt - st * st;
  tr.k0 = cnt >= 2 && den > 0.0 ? (cnt * sty - st * sy) / den : 0.0;
  auto& rep = tr.report;
  rep.name = "kstar_reconstruction";
  rep.ratio = safe_ratio(rep.lhs, rep.rhs);
  rep.parameters = {{"C_K", tr.c_k}, {"K0", tr.k0}, {"max_residual", worst}};
  // Tolerance covers the power-iteration estimate of C_K from below.
  rep.bounded = worst <= 1e-6 * (1.0 + rep.lhs);
  return tr;
}

// --- symbol-level Garding probe --------------------------------------------------------------

struct GardingProbeOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 10000;
  double xi_max = 0.0;    ///< 0: the grid's Nyquist |xi| / 2
  double x_radius = 0.0;  ///< 0: 1.05 * flat radius
  double scale = 1.0;     ///< multiple C of the escape function in e^{C p}
};

/// Lowest eigenvalue of e^{Cp}(C H_{h2}p I - Herm B(x, xi)) relative to |xi| <x>^{-Ntilde}, where
/// B = i [[b1.xi, b2.xi], [conj(b2).xi, conj(b1).xi]] is the first-order symbol of the system for
/// (u, conj u). Positive everywhere is the pointwise content of the sharp Garding step.
inline EstimateReport garding_commutator_probe(const CoefficientModel& model, const EscapeFunction& p, double t,
                                               const Grid& grid, const GardingProbeOptions& opt = {}) {
  const int n = model.dim();
  const double xr = opt.x_radius > 0.0 ? opt.x_radius : 1.05 * model.flat_radius();
  const double xi_max =
      opt.xi_max > 0.0 ? opt.xi_max : std::max(1.0, 0.5 * grid.frequency_step() * grid.points() / 2.0);
  const HaltonSequence seq(2 * n, opt.seed);
  EstimateReport rep;
  rep.name = "garding_commutator";
  double worst = std::numeric_limits<double>::infinity(), diag_min = worst;
  for (std::size_t s = 0; s < opt.samples; ++s) {
    const auto q = seq.point(s);
    VecN x(n), dir(n);
    for (int d = 0; d < n; ++d) x(d) = xr * (2.0 * q[d] - 1.0);
    if (n == 1) {
      dir(0) = q[n] < 0.5 ? -1.0 : 1.0;
    } else if (n == 2) {
      const double th = 2.0 * kPi * q[n];
      dir << std::cos(th), std::sin(th);
    } else {
      const double zc = 2.0 * q[n] - 1.0, ph = 2.0 * kPi * q[n + 1];
      const double rho = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      dir << rho * std::cos(ph), rho * std::sin(ph), zc;
    }
    const double mag = 1.0 + (xi_max - 1.0) * q[2 * n - 1];
    const VecN xi = mag * dir;
    const double hp = opt.scale * hamilton_derivative(model, p, t, x, xi);
    const CVecN b1 = model.b1(x, t), b2 = model.b2(x, t);
    const CVecN cxi = xi.cast<Complex>();
    const Complex b1x = (b1.array() * cxi.array()).sum(), b2x = (b2.array() * cxi.array()).sum();
    Eigen::Matrix2cd bm;
    bm << kI * b1x, kI * b2x, kI * std::conj(b2x), kI * std::conj(b1x);
    const Eigen::Matrix2cd herm = 0.5 * (bm + bm.adjoint());
    const Eigen::Matrix2cd m = hp * Eigen::Matrix2cd::Identity() - herm;
    const double lam = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
    const double w = std::exp(opt.scale * p(x, xi));
    const double norm = mag * std::pow(bracket(x), -p.ntilde());
    const double rel = w * lam / norm;
    diag_min = std::min(diag_min, w * hp / norm);
    if (rel < worst) {
      worst = rel;
      rep.lhs = w * std::max(herm.norm(), 0.0);
      rep.rhs = w * hp;
    }
  }
  rep.ratio = safe_ratio(rep.lhs, rep.rhs);
  rep.parameters = {{"t", t},
                    {"margin", worst},
                    {"diagonal_margin", diag_min},
                    {"Ntilde", p.ntilde()},
                    {"xi_max", xi_max},
                    {"samples", static_cast<double>(opt.samples)}};
  rep.bounded = worst > 0.0;
  return rep;
}

}  // namespace uhs
