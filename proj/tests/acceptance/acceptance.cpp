// Acceptance run at desk scale: n = 2, signature (1, 1), M = 128, L = 20.
// Prints one PASS/FAIL line per criterion and exits nonzero if any criterion fails.

#include "uhs/diagnostics/diagnostics.hpp"

#include <chrono>
#include <cstdio>
#include <random>

namespace {

using namespace uhs;

constexpr int kM = 128;
constexpr double kL = 20.0;
constexpr double kFlat = 18.0;  // 0.9 L

const Grid& desk_grid() {
  static const Grid g(2, kM, kL);
  return g;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

VecN v2(double a, double b) {
  VecN v(2);
  v << a, b;
  return v;
}

CoefficientModel bump(double rho, int k = 1, std::map<std::string, double> extra = {}) {
  ModelSpec s;
  s.family = Family::gaussian_bump;
  s.k = k;
  s.params = {{"rho", rho}, {"width", 2.0}};
  for (auto& [key, v] : extra) s.params[key] = v;
  return {s, kFlat};
}

CoefficientModel rational(double rho) {
  ModelSpec s;
  s.family = Family::rational_decay;
  s.params = {{"rho", rho}};
  return {s, kFlat};
}

CoefficientModel ring_well() {
  ModelSpec s;
  s.family = Family::ring_well;
  s.k = 2;
  s.params = {{"depth", 0.9}, {"radius", 3.0}, {"width", 1.0}};
  return {s, kFlat};
}

CoefficientModel cubic(double gamma) {
  ModelSpec s;
  s.family = Family::quasilinear_cubic;
  s.params = {{"rho", 0.05}, {"width", 2.0}, {"gamma", gamma}};
  return {s, kFlat};
}

ComplexField random_field(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<Complex> v(g.size());
  for (auto& z : v) z = {nd(rng), nd(rng)};
  return {g, std::move(v)};
}

ComplexField gaussian(const Grid& g, double amp, double width, double k0 = 0.5) {
  return ComplexField::from_function(g, [&](const VecN& x) {
    return amp * std::exp(-x.squaredNorm() / (width * width)) * std::exp(kI * k0 * x(0));
  });
}

double max_abs(const ComplexField& a) {
  double m = 0.0;
  for (auto z : a.values()) m = std::max(m, std::abs(z));
  return m;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_diff(const ComplexField& a, const ComplexField& b) {
  std::vector<Complex> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return l2_norm(d, a.grid().cell_volume());
}

SolverConfig solver(double eps, double dt, double T, Scheme scheme = Scheme::imex_rk2) {
  SolverConfig c;
  c.epsilon = eps;
  c.dt = dt;
  c.T = T;
  c.scheme = scheme;
  c.grid = desk_grid();
  c.record_every = 1000000;
  return c;
}

// 1. Flow exactness -------------------------------------------------------------------------------

Outcome flow_exactness() {
  const Signature sig(2, 1);
  const auto flat = CoefficientModel::flat(sig, kFlat);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-10.0, 10.0);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const VecN x0 = v2(ux(rng), ux(rng));
    const VecN xi0 = v2(nd(rng), nd(rng));
    RayOptions opt;
    opt.s_max = 10.0;
    opt.tol = 1e-12;
    const auto tr = integrate_ray(flat, PhasePoint(x0, xi0), opt);
    for (const auto& s : tr.samples) {
      const VecN X = x0 + 2.0 * s.s * sig.apply(xi0);
      worst = std::max({worst, (s.X - X).norm() / (1.0 + X.norm()), (s.Xi - xi0).norm() / xi0.norm()});
    }
    if (tr.back().s != 10.0) return {false, "flat ray stopped early at s=" + num(tr.back().s)};
  }
  // h conservation on every family.
  double drift = 0.0;
  const std::vector<CoefficientModel> models{flat, bump(0.3), bump(0.3, 2), rational(0.3), ring_well(), cubic(1.0)};
  for (const auto& m : models)
    for (int i = 0; i < 10; ++i) {
      const auto tr = integrate_ray(m, PhasePoint(v2(ux(rng), ux(rng)), v2(nd(rng), nd(rng))), 10.0, 1e9, 1e-11);
      drift = std::max(drift, tr.h_drift_max);
    }
  return {worst <= 1e-8 && drift <= 1e-8, "max flow error " + num(worst) + ", max h drift " + num(drift)};
}

// 2. Non-trapping discrimination --------------------------------------------------------------------

Outcome non_trapping() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ux(-8.0, 8.0);
  std::normal_distribution<double> nd;
  std::vector<PhasePoint> seeds;
  for (int i = 0; i < 100; ++i) seeds.emplace_back(v2(ux(rng), ux(rng)), v2(nd(rng), nd(rng)));
  int escaped = 0, total = 0;
  for (const auto& m : {CoefficientModel::flat(Signature(2, 1), kFlat), bump(0.1), bump(0.1, 2)})
    for (const auto& v : classify_trapping(m, seeds, 1000.0, kFlat)) {
      escaped += v.escaped;
      ++total;
    }
  const auto ring = ring_well();
  const double r = circular_orbit_radius(ring, 3.0, 3.5);
  const std::vector<PhasePoint> ring_seeds{PhasePoint(v2(r, 0), v2(0, 1)), PhasePoint(v2(r, 0), v2(1, 0)),
                                           PhasePoint(v2(0, r), v2(0, 1)), PhasePoint(v2(-r, 0), v2(-1, 0))};
  const auto rv = classify_trapping(ring, ring_seeds, 1000.0, kFlat);
  const bool tangential_undecided = !rv[0].escaped && !rv[0].step_failure;
  const bool radial_escape = rv[1].escaped && rv[2].escaped && rv[3].escaped;
  return {escaped == total && tangential_undecided && radial_escape,
          std::to_string(escaped) + "/" + std::to_string(total) + " escaped on flat and small bumps; ring-well tangential " +
              (tangential_undecided ? "undecided" : "decided") + ", radial " + (radial_escape ? "escape" : "do not escape")};
}

// 3. Ichinose closed form ------------------------------------------------------------------------------

Outcome ichinose_closed_form() {
  ModelSpec s;
  s.family = Family::gaussian_bump;
  s.params = {{"rho", 0.0}, {"b1_im", 1.0}, {"b_width", 1.0}};
  const CoefficientModel m(s, kFlat);
  // Ray X = 2 s e1 through a unit Gaussian: int_0^inf e^{-4 s^2} ds = sqrt(pi)/4.
  const double exact = std::sqrt(kPi) / 4.0;
  const auto r = ichinose_functional(m, {{v2(0, 0), v2(1, 0)}}, {8.0});
  const double err = std::abs(r.value - exact);
  // Finite R against erf as a second oracle.
  const auto half = ichinose_functional(m, {{v2(0, 0), v2(1, 0)}}, {0.5});
  const double err_half = std::abs(half.value - exact * std::erf(1.0));
  return {err <= 1e-6 && err_half <= 1e-6, "value " + num(r.value) + ", error " + num(err) + " (R=1/2 error " +
                                              num(err_half) + ")"};
}

// 4. Operator identities ------------------------------------------------------------------------------

Outcome operator_identities() {
  const Grid& g = desk_grid();
  std::mt19937_64 rng(14);
  std::string notes;
  bool ok = true;

  // Identity and multiplier through the direct sum.
  const ComplexField u = random_field(g, rng);
  const QuantizationPlan id(g, Symbol::constant(1.0), {.fft_multipliers = false});
  const double e_id = std::max(max_abs_diff(quantize_apply(id, u), u), max_abs_diff(adjoint_apply(id, u), u)) / max_abs(u);
  ok = ok && e_id <= 1e-12;
  const VecN k1 = g.frequency(g.frequency_index({5, -9, 0})), k2 = g.frequency(g.frequency_index({-17, 3, 0}));
  const auto pw = ComplexField::from_function(g, [&](const VecN& x) {
    return std::exp(kI * x.dot(k1)) + 0.5 * std::exp(kI * x.dot(k2));
  });
  const auto dpw = ComplexField::from_function(g, [&](const VecN& x) {
    return kI * k1(0) * std::exp(kI * x.dot(k1)) + 0.5 * kI * k2(0) * std::exp(kI * x.dot(k2));
  });
  const QuantizationPlan dx(g, Symbol::multiplier([](const VecN& xi) { return kI * xi(0); }, 1.0),
                            {.fft_multipliers = false});
  const double e_mult = max_abs_diff(quantize_apply(dx, pw), dpw) / max_abs(dpw);
  ok = ok && e_mult <= 1e-12;

  // Adjoint pairing on 10 x 10 pairs of a genuinely x-dependent symbol.
  const Symbol sym(
      [](const VecN& x, const VecN& xi) {
        return Complex(std::exp(-0.01 * x.squaredNorm()), 0.3 * std::sin(0.2 * x(0)) * xi(1) / bracket(xi));
      },
      0.0, SymbolClass::classical);
  const QuantizationPlan dense(g, sym, {.mode = ApplyMode::dense});
  std::vector<ComplexField> us, vs;
  for (int i = 0; i < 10; ++i) us.push_back(random_field(g, rng));
  for (int i = 0; i < 10; ++i) vs.push_back(random_field(g, rng));
  const auto au = quantize_apply(dense, us);
  const auto av = adjoint_apply(dense, vs);
  double e_pair = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      e_pair = std::max(e_pair, std::abs(inner(au[i], vs[j]) - inner(us[i], av[j])) / (l2_norm(us[i]) * l2_norm(vs[j])));
  ok = ok && e_pair <= 1e-10;

  // Zero b1: E^R vanishes, for a flat and a curved principal part.
  double e_er = 0.0;
  for (const auto& m : {CoefficientModel::flat(Signature(2, 1), kFlat), bump(0.1)}) {
    const auto f = integrating_factor(truncate(m, 4.0, g), {}, &g);
    auto kp = std::make_shared<QuantizationPlan>(g, f.k_plus);
    auto km = std::make_shared<QuantizationPlan>(g, f.k_minus);
    e_er = std::max(e_er, operator_norm(compose_E_R(kp, km), g, 3).norm);
  }
  ok = ok && e_er <= 1e-10;

  // Dense (row streaming at this size) against chunked, plus a materialized table on a small grid.
  const QuantizationPlan chunked(g, sym, {.mode = ApplyMode::chunked, .chunk_size = 4096});
  double e_dc = max_abs_diff(au[0], quantize_apply(chunked, us[0])) / max_abs(au[0]);
  const Grid small(2, 32, kL);
  const ComplexField us32 = random_field(small, rng);
  const QuantizationPlan d32(small, sym), c32(small, sym, {.mode = ApplyMode::chunked, .chunk_size = 100});
  const auto a32 = quantize_apply(d32, us32);
  e_dc = std::max(e_dc, max_abs_diff(a32, quantize_apply(c32, us32)) / max_abs(a32));
  e_dc = std::max(e_dc, max_abs_diff(adjoint_apply(d32, us32), adjoint_apply(c32, us32)) / max_abs(a32));
  ok = ok && e_dc <= 1e-12;

  notes = "identity " + num(e_id) + ", multiplier " + num(e_mult) + ", adjoint pairing " + num(e_pair) +
          " (100 pairs), ||E^R|| " + num(e_er) + ", dense/chunked " + num(e_dc);
  return {ok, notes};
}

// 5. Escape-function positivity ---------------------------------------------------------------------

Outcome escape_positivity() {
  const auto p = escape_function_flat(Signature(2, 1), 2.0);
  const GardingOptions opt{.seed = 5, .xi_max = kPi * kM / (4.0 * kL)};
  const auto flat = CoefficientModel::flat(Signature(2, 1), kFlat);
  const double m_flat = garding_margin(flat, p, 0.0, 10000, 0.0, opt);
  // Pointwise oracle for the flat model: H p = 2 |xi| / (1 + r^2), r = x.A_h xi / |xi|.
  std::mt19937_64 rng(15);
  std::normal_distribution<double> nd(0.0, 5.0);
  double e_identity = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const VecN x = v2(nd(rng), nd(rng)), xi = v2(nd(rng), nd(rng));
    const double r = x.dot(v2(xi(0), -xi(1))) / xi.norm();
    e_identity = std::max(e_identity, std::abs(hamilton_derivative(flat, p, 0.0, x, xi) - 2.0 * xi.norm() / (1.0 + r * r)) /
                                          xi.norm());
  }
  double m_bump = std::numeric_limits<double>::infinity();
  for (double a : {1e-3, 5e-4, 1e-4}) m_bump = std::min(m_bump, garding_margin(bump(a), p, 0.0, 10000, 0.0, opt));
  return {m_flat > 0.0 && m_bump > 0.0 && e_identity <= 1e-12,
          "flat margin " + num(m_flat) + ", bump (<= 1e-3) margin " + num(m_bump) + ", flat identity error " +
              num(e_identity)};
}

// 6. Self-adjointness energy identity ---------------------------------------------------------------

Outcome self_adjointness() {
  double worst = 0.0;
  std::string names;
  auto run = [&](const CoefficientModel& m, bool quasi) {
    auto c = solver(1e-2, 2e-3, 0.02);
    c.check_self_adjoint = true;
    const auto u0 = gaussian(desk_grid(), quasi ? 0.2 : 1.0, 2.0);
    const auto rec = quasi ? solve_quasilinear({&m, u0, {}}, c) : solve_linear({&m, u0, {}}, c);
    worst = std::max(worst, rec.max_self_adjoint_residual);
    names += (names.empty() ? "" : ",") + to_string(m.family());
  };
  run(CoefficientModel::flat(Signature(2, 1), kFlat), false);
  run(bump(0.1), false);
  run(rational(0.2), false);
  run(ring_well(), false);
  run(cubic(1.0), true);
  return {worst <= 1e-10, "max per-step residual " + num(worst) + " over " + names};
}

// 7. Constant-coefficient solver exactness ----------------------------------------------------------

/// Error at t = T against the exact plane wave e^{(i h - eps |xi|^4) t}.
double plane_wave_error(int m0, int m1, double eps, double dt, double T, Scheme scheme) {
  const Grid& g = desk_grid();
  const auto flat = CoefficientModel::flat(Signature(2, 1), kFlat);
  const VecN xi = g.frequency(g.frequency_index({m0, m1, 0}));
  const double h = xi(0) * xi(0) - xi(1) * xi(1);
  const auto u0 = ComplexField::from_function(g, [&](const VecN& x) { return std::exp(kI * xi.dot(x)); });
  const auto rec = solve_linear({&flat, u0, {}}, solver(eps, dt, T, scheme));
  const Complex growth = std::exp((kI * h - eps * std::pow(xi.squaredNorm(), 2)) * T);
  const auto exact = ComplexField::from_function(g, [&](const VecN& x) { return growth * std::exp(kI * xi.dot(x)); });
  return max_abs_diff(rec.final_state, exact);
}

Outcome solver_exactness() {
  double e_match = 0.0, order_min = std::numeric_limits<double>::infinity();
  for (Scheme s : {Scheme::imex_rk2, Scheme::exponential_lawson}) {
    e_match = std::max(e_match, plane_wave_error(1, 2, 1e-2, 5e-3, 1.0, s));
    std::vector<double> errs;
    for (double dt : {4e-3, 2e-3, 1e-3}) errs.push_back(plane_wave_error(24, 8, 1e-4, dt, 1.0, s));
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) order_min = std::min(order_min, std::log2(errs[i] / errs[i + 1]));
  }
  return {e_match <= 1e-8 && order_min >= 1.9,
          "plane-wave error at t=1 " + num(e_match) + ", min dt order " + num(order_min) + " (both schemes)"};
}

// 8. Epsilon-uniform smoothing ratio ------------------------------------------------------------------

Outcome smoothing_uniformity() {
  const auto m = bump(0.1, 1, {{"b1_im", 0.05}, {"f_re", 0.2}});
  const LinearProblem p{&m, gaussian(desk_grid(), 1.0, 2.0), {}};
  std::vector<SolverConfig> sweep;
  for (double eps : {1e-2, 1e-3, 1e-4}) sweep.push_back(solver(eps, 4e-3, 1.0));
  const auto chk = smoothing_estimate_check(p, sweep);
  std::string ratios;
  for (const auto& r : chk.runs) ratios += (ratios.empty() ? "" : ", ") + num(r.ratio);
  const double var = chk.report.parameters.at("ratio_variation");
  return {chk.report.bounded && var < 0.2, "ratios [" + ratios + "], variation " + num(var)};
}

// 9. Interpolation estimate -------------------------------------------------------------------------

Outcome interpolation() {
  const Grid& g = desk_grid();
  std::mt19937_64 rng(19);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_int_distribution<int> mode(-kM / 2, kM / 2 - 1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<Complex> spec(g.size());
    switch (i % 3) {
      case 0:  // white noise
        for (auto& z : spec) z = {nd(rng), nd(rng)};
        break;
      case 1: {  // power-law spectrum
        const double decay = 4.0 * ud(rng);
        for (std::size_t k = 0; k < spec.size(); ++k)
          spec[k] = Complex(nd(rng), nd(rng)) * std::pow(1.0 + g.frequency(k).squaredNorm(), -0.5 * decay);
        break;
      }
      default:  // a few modes
        for (int j = 0, n = 2 + i % 4; j < n; ++j) spec[g.frequency_index({mode(rng), mode(rng), 0})] += Complex(nd(rng), nd(rng));
    }
    const auto f = spectral_transform(ComplexField(g, std::move(spec), Domain::spectral), fft::Direction::inverse);
    worst = std::max(worst, interpolation_ratio(f));
  }
  double equality = 0.0;
  for (int i = 0; i < 200; ++i) {
    int a = mode(rng), b = mode(rng);
    if (a == 0 && b == 0) a = 1;
    const VecN xi = g.frequency(g.frequency_index({a, b, 0}));
    const auto f = ComplexField::from_function(g, [&](const VecN& x) { return std::exp(kI * xi.dot(x)); });
    equality = std::max(equality, std::abs(interpolation_ratio(f) - 1.0));
  }
  return {worst <= 1.0 && equality <= 1e-10,
          "max ratio " + num(worst) + " on 1e4 fields, single-frequency |ratio - 1| " + num(equality)};
}

// 10. Proportionality property suite -----------------------------------------------------------------

Outcome proportionality() {
  std::mt19937_64 rng(20);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  auto random_a = [&](int n) {
    MatN q = MatN::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) q(i, j) = nd(rng);
    Eigen::HouseholderQR<MatN> qr(q);
    const MatN o = qr.householderQ();
    VecN d(n);
    const int k = 1 + static_cast<int>(rng() % (n - 1));  // k positive, n - k negative
    for (int i = 0; i < n; ++i) d(i) = (i < k ? 1.0 : -1.0) * ud(rng);
    return MatN(o * d.asDiagonal() * o.transpose());
  };
  int prop_ok = 0, witness_ok = 0;
  double lambda_err = 0.0, worst_a_form = 0.0;
  const double tol = 1e-9;
  for (int i = 0; i < 10000; ++i) {
    const int n = 2 + i % 2;
    const MatN a = random_a(n);
    const Complex lambda(nd(rng), nd(rng));
    const auto v = proportionality_check(a, lambda * a.cast<Complex>(), tol);
    if (const auto* p = std::get_if<Proportional>(&v)) {
      ++prop_ok;
      lambda_err = std::max(lambda_err, std::abs(p->lambda - lambda) / std::abs(lambda));
    }
  }
  for (int i = 0; i < 10000; ++i) {
    const int n = 2 + i % 2;
    const MatN a = random_a(n);
    CMatN r(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) r(j, k) = {nd(rng), nd(rng)};
    const CMatN b = 0.5 * (r + r.transpose());
    const auto v = proportionality_check(a, b, tol);
    const auto* w = std::get_if<NullConeWitness>(&v);
    if (w == nullptr) continue;
    // Recompute both forms from the returned vector.
    const VecN& xi = w->xi;
    const double af = xi.dot(a * xi);
    const Complex bf = (xi.cast<Complex>().transpose() * b * xi.cast<Complex>())(0, 0);
    worst_a_form = std::max(worst_a_form, std::abs(af));
    if (std::abs(xi.norm() - 1.0) <= 1e-12 && std::abs(af) <= tol && std::abs(bf) > tol) ++witness_ok;
  }
  return {prop_ok == 10000 && witness_ok == 10000 && lambda_err <= 1e-12,
          std::to_string(prop_ok) + "/10000 proportional (lambda error " + num(lambda_err) + "), " +
              std::to_string(witness_ok) + "/10000 verified witnesses (max |<A xi, xi>| " + num(worst_a_form) + ")"};
}

// 11. Quasilinear linearization order and vanishing viscosity ------------------------------------------

Outcome quasilinear() {
  const auto m = cubic(1.0);
  ModelSpec ls = m.spec();
  ls.params.erase("gamma");
  ls.family = Family::gaussian_bump;
  const CoefficientModel lin(ls, kFlat);
  const auto c = solver(1e-2, 5e-3, 0.1);
  std::vector<double> diffs;
  for (double eta : {2e-2, 1e-2, 5e-3}) {
    const auto u0 = gaussian(desk_grid(), eta, 1.5);
    const auto q = solve_quasilinear({&m, u0, {}}, c);
    const auto l = solve_linear({&lin, u0, {}}, c);
    diffs.push_back(l2_diff(q.final_state, l.final_state));
  }
  double order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) order = std::min(order, std::log2(diffs[i] / diffs[i + 1]));

  std::vector<ComplexField> finals;
  const auto u0 = gaussian(desk_grid(), 0.2, 1.5);
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) finals.push_back(solve_quasilinear({&m, u0, {}}, solver(eps, 5e-3, 0.1)).final_state);
  std::vector<double> gaps;
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
    gaps.push_back(l2_diff(finals[i], finals[i + 1]));
    if (i > 0 && !(gaps[i] < gaps[i - 1])) monotone = false;
  }
  std::string g;
  for (double v : gaps) g += (g.empty() ? "" : ", ") + num(v);
  return {order >= 1.9 && monotone, "amplitude order " + num(order) + ", viscosity gaps [" + g + "]"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // runtime bound from the criterion, 0 when none is stated
    Outcome (*fn)();
  };
  const std::vector<Criterion> criteria{
      {1, "flow exactness", 10.0, flow_exactness},
      {2, "non-trapping discrimination", 30.0, non_trapping},
      {3, "Ichinose closed form", 0.0, ichinose_closed_form},
      {4, "operator identities", 120.0, operator_identities},
      {5, "escape-function positivity", 0.0, escape_positivity},
      {6, "self-adjointness energy identity", 0.0, self_adjointness},
      {7, "constant-coefficient solver exactness", 0.0, solver_exactness},
      {8, "epsilon-uniform smoothing ratio", 600.0, smoothing_uniformity},
      {9, "interpolation estimate", 0.0, interpolation},
      {10, "proportionality property suite", 0.0, proportionality},
      {11, "quasilinear linearization order", 0.0, quasilinear},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; runtime over " + std::to_string(static_cast<int>(c.budget_s)) + " s";
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
