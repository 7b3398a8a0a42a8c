#include "uhs/solver/solver.hpp"

#include <gtest/gtest.h>

#include <random>

namespace uhs {
namespace {

const Grid kGrid(2, 32, 20.0);

ComplexField plane_wave(const Grid& g, int m1, int m2) {
  const double dk = g.frequency_step();
  return ComplexField::from_function(g, [&](const VecN& x) {
    return std::exp(kI * (m1 * dk * x(0) + m2 * dk * x(1)));
  });
}

ComplexField gaussian(const Grid& g, double amp, double width, VecN c = VecN::Zero(2)) {
  return ComplexField::from_function(g, [&](const VecN& x) {
    return amp * std::exp(-(x - c).squaredNorm() / (width * width)) * std::exp(kI * 0.5 * x(0));
  });
}

CoefficientModel bump(double rho, std::map<std::string, double> extra = {}) {
  ModelSpec s;
  s.family = Family::gaussian_bump;
  s.params = {{"rho", rho}, {"width", 2.0}};
  for (auto& [k, v] : extra) s.params[k] = v;
  return {s, 18.0};
}

CoefficientModel cubic(double gamma, double r0 = 1e3) {
  ModelSpec s;
  s.family = Family::quasilinear_cubic;
  s.params = {{"rho", 0.05}, {"width", 2.0}, {"gamma", gamma}, {"r0", r0}};
  return {s, 18.0};
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SolverConfig config(double eps, double dt, double T, Grid g = kGrid) {
  SolverConfig c;
  c.epsilon = eps;
  c.dt = dt;
  c.T = T;
  c.grid = std::move(g);
  c.record_every = 1000000;
  return c;
}

TEST(ViscositySemigroup, ZeroViscosityIsIdentity) {
  const auto u = gaussian(kGrid, 1.0, 2.0);
  const auto v = viscosity_semigroup(u, 0.0, 0.1);
  EXPECT_EQ(max_abs_diff(u.values(), v.values()), 0.0);
  EXPECT_THROW(viscosity_semigroup(u, 0.1, 0.0), PreconditionError);
}

TEST(ViscositySemigroup, PlaneWaveDecayAndContraction) {
  const auto u = plane_wave(kGrid, 3, -2);
  const double xi2 = kGrid.frequency_step() * kGrid.frequency_step() * 13.0;
  const auto v = viscosity_semigroup(u, 0.3, 0.7);
  const double f = std::exp(-0.3 * xi2 * xi2 * 0.7);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(std::abs(v[i] - f * u[i]), 0.0, 1e-13);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Complex> w(kGrid.size());
    for (auto& z : w) z = {g(rng), g(rng)};
    const ComplexField r(kGrid, w);
    EXPECT_LE(l2_norm(viscosity_semigroup(r, 0.01, 0.1)), l2_norm(r) * (1 + 1e-14));
  }
}

TEST(ApplyL, FlatPlaneWavesHaveMultiplierIh) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  const double dk = kGrid.frequency_step();
  for (auto [m1, m2] : {std::pair{1, 2}, std::pair{4, -1}, std::pair{-3, 3}}) {
    const auto u = plane_wave(kGrid, m1, m2);
    const auto lu = apply_L(m, 0.0, u);
    const double h = dk * dk * (m1 * m1 - m2 * m2);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(std::abs(lu[i] - kI * h * u[i]), 0.0, 1e-12);
  }
}

TEST(ApplyL, DiscreteSelfAdjointness) {
  const auto m = bump(0.3);
  const DiscreteOperator op(kGrid);
  const auto c = evaluate_coefficients(m, kGrid, 0.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Complex> w(kGrid.size());
    for (auto& z : w) z = {g(rng), g(rng)};
    EXPECT_LE(self_adjoint_residual(op, c, w), 1e-12);
  }
}

TEST(ApplyL, QuasilinearDifferenceScalesAtLeastQuadratically) {
  const auto m = cubic(1.0);
  double prev = 0.0;
  for (double eta : {1e-2, 5e-3}) {
    const auto u = gaussian(kGrid, eta, 2.0);
    const auto full = apply_L(m, 0.0, u, &u);
    const auto lin = apply_L_linearized(m, 0.0, u);
    std::vector<Complex> d(u.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = full[i] - lin[i];
    const double e = l2_norm(d, kGrid.cell_volume());
    if (prev > 0.0) {
      EXPECT_GE(std::log(prev / e) / std::log(2.0), 1.9);
    }
    prev = e;
  }
  const auto big = gaussian(kGrid, 10.0, 2.0);
  const auto tight = cubic(1.0, 1.0);
  EXPECT_THROW(apply_L(tight, 0.0, big, &big), RangeError);
}

TEST(SolverConfig, StabilityBudgetIsChecked) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  auto c = config(1e-2, 0.05, 1.0);
  EXPECT_NO_THROW(c.validate(m));
  c.dt = 1.0;
  EXPECT_THROW(c.validate(m), ConfigError);
  c.dt = 0.05;
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(m), ConfigError);
}

double plane_wave_error(Scheme scheme, double eps, double dt, int m1, int m2, const Grid& g) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  auto c = config(eps, dt, 1.0, g);
  c.scheme = scheme;
  const auto u0 = plane_wave(g, m1, m2);
  const auto rec = solve_linear({&m, u0, {}}, c);
  const double dk = g.frequency_step();
  const double h = dk * dk * (m1 * m1 - m2 * m2);
  const double x2 = dk * dk * (m1 * m1 + m2 * m2);
  const Complex f = std::exp((kI * h - eps * x2 * x2) * 1.0);
  double err = 0.0;
  for (std::size_t i = 0; i < u0.size(); ++i) err = std::max(err, std::abs(rec.final_state[i] - f * u0[i]));
  return err;
}

TEST(SolveLinear, PlaneWaveMatchesClosedForm) {
  for (Scheme s : {Scheme::imex_rk2, Scheme::exponential_lawson})
    EXPECT_LE(plane_wave_error(s, 1e-2, 1e-2, 1, 2, kGrid), 1e-8) << to_string(s);
}

TEST(SolveLinear, SecondOrderInTime) {
  for (Scheme s : {Scheme::imex_rk2, Scheme::exponential_lawson}) {
    const double e1 = plane_wave_error(s, 1e-3, 0.04, 8, 3, kGrid);
    const double e2 = plane_wave_error(s, 1e-3, 0.02, 8, 3, kGrid);
    EXPECT_GE(std::log2(e1 / e2), 1.9) << to_string(s) << " " << e1 << " " << e2;
  }
}

TEST(SolveLinear, ZeroStaysZero) {
  const auto m = bump(0.2);
  const auto rec = solve_linear({&m, ComplexField::zeros(kGrid), {}}, config(1e-2, 0.05, 0.5));
  EXPECT_EQ(rec.termination, RunTermination::completed);
  for (std::size_t i = 0; i < kGrid.size(); ++i) EXPECT_EQ(rec.final_state[i], Complex{});
}

TEST(SolveLinear, ViscousRunIsDissipative) {
  const auto m = bump(0.3);
  auto c = config(1e-2, 0.02, 1.0);
  c.record_every = 5;
  c.check_self_adjoint = true;
  const auto rec = solve_linear({&m, gaussian(kGrid, 1.0, 1.5), {}}, c);
  ASSERT_EQ(rec.termination, RunTermination::completed);
  for (std::size_t i = 1; i < rec.rows.size(); ++i) {
    EXPECT_GT(rec.rows[i].t, rec.rows[i - 1].t);
    EXPECT_LE(rec.rows[i].l2, rec.rows[i - 1].l2 * (1 + 1e-8));
  }
  EXPECT_LE(rec.max_self_adjoint_residual, 1e-10);
}

TEST(SolveLinear, RecordColumnsAndDeterminism) {
  const auto m = bump(0.2, {{"b1_im", 0.05}});
  auto c = config(1e-2, 0.05, 0.5);
  c.record_every = 2;
  c.sobolev_orders = {0.0, 1.0};
  c.weighted_pairs = {{0.0, 1.0}, {1.0, 2.0}};
  c.store_snapshots = true;
  const LinearProblem p{&m, gaussian(kGrid, 1.0, 2.0), {}};
  const auto a = solve_linear(p, c);
  const auto b = solve_linear(p, c);
  ASSERT_EQ(a.rows.size(), 6u);
  EXPECT_EQ(a.snapshots.size(), a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].sobolev.size(), 2u);
    EXPECT_EQ(a.rows[i].weighted.size(), 2u);
    EXPECT_NEAR(a.rows[i].sobolev[0], a.rows[i].l2, 1e-12);
    EXPECT_TRUE(std::isnan(a.rows[i].kstar));
    EXPECT_EQ(a.rows[i].l2, b.rows[i].l2);
    EXPECT_EQ(a.rows[i].smoothing_density, b.rows[i].smoothing_density);
  }
  EXPECT_EQ(a.rows[0].smoothing_increment, 0.0);
  for (std::size_t i = 0; i < a.final_state.size(); ++i) EXPECT_EQ(a.final_state[i], b.final_state[i]);
}

TEST(SolveLinear, ForcingDrivesZeroData) {
  const auto m = bump(0.1, {{"f_re", 1.0}});
  const auto rec = solve_linear({&m, ComplexField::zeros(kGrid), {}}, config(1e-2, 0.02, 0.2));
  // For small t, u ~ t f.
  const ComplexField f = ComplexField::from_function(kGrid, [&](const VecN& x) { return m.forcing(x, 0.0); });
  EXPECT_NEAR(l2_norm(rec.final_state) / (0.2 * l2_norm(f)), 1.0, 0.05);
}

TEST(SolveLinear, RejectsQuasilinearModel) {
  const auto m = cubic(1.0);
  EXPECT_THROW(solve_linear({&m, ComplexField::zeros(kGrid), {}}, config(1e-2, 0.05, 0.5)), PreconditionError);
}

TEST(SolveQuasilinear, ZeroStaysZero) {
  const auto m = cubic(1.0);
  const auto rec = solve_quasilinear({&m, ComplexField::zeros(kGrid), {}}, config(1e-2, 0.05, 0.5));
  EXPECT_EQ(rec.termination, RunTermination::completed);
  EXPECT_EQ(l2_norm(rec.final_state), 0.0);
  EXPECT_EQ(continuation_monitor(rec, 1.0).verdict, ContinuationVerdict::within_theory);
}

TEST(SolveQuasilinear, CloseToLinearizedRunAtSmallAmplitude) {
  const auto m = cubic(1.0);
  ModelSpec ls = m.spec();
  ls.params.erase("gamma");
  ls.params.erase("r0");
  ls.family = Family::gaussian_bump;
  const CoefficientModel lin(ls, 18.0);
  const auto c = config(1e-2, 0.01, 0.1);
  std::vector<double> diffs;
  for (double eta : {1e-2, 5e-3}) {
    const auto u0 = gaussian(kGrid, eta, 1.5);
    const auto q = solve_quasilinear({&m, u0, {}}, c);
    const auto l = solve_linear({&lin, u0, {}}, c);
    std::vector<Complex> d(u0.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = q.final_state[i] - l.final_state[i];
    diffs.push_back(l2_norm(d, kGrid.cell_volume()));
  }
  EXPECT_GE(std::log2(diffs[0] / diffs[1]), 1.9);
}

TEST(SolveQuasilinear, LeavingTheBallEndsWithRangeExit) {
  const auto m = cubic(1.0, 0.5);
  auto c = config(1e-2, 0.01, 0.5);
  c.record_every = 1;
  const auto rec = solve_quasilinear({&m, gaussian(kGrid, 2.0, 1.5), {}}, c);
  EXPECT_EQ(rec.termination, RunTermination::range_exit);
  const auto rep = continuation_monitor(rec, 1e9);
  EXPECT_EQ(rep.verdict, ContinuationVerdict::left_ball);
  ASSERT_TRUE(rep.exit_time.has_value());
  EXPECT_EQ(*rep.exit_time, 0.0);
}

TEST(ContinuationMonitor, ThresholdAndDoubling) {
  RunRecord r;
  for (int i = 0; i < 5; ++i) {
    RecordRow row;
    row.t = 0.1 * i;
    row.l2 = 1.0 + i;
    row.sobolev = {1.0 + i};
    row.weighted = {0.0};
    r.rows.push_back(row);
  }
  auto rep = continuation_monitor(r, 100.0);
  EXPECT_EQ(rep.verdict, ContinuationVerdict::within_theory);
  ASSERT_TRUE(rep.doubling_time.has_value());
  EXPECT_DOUBLE_EQ(*rep.doubling_time, 0.1);
  rep = continuation_monitor(r, 3.5);
  EXPECT_EQ(rep.verdict, ContinuationVerdict::left_ball);
  EXPECT_DOUBLE_EQ(*rep.exit_time, 0.3);
  r.termination = RunTermination::norm_blowup;
  EXPECT_EQ(continuation_monitor(r, 100.0).verdict, ContinuationVerdict::blowup);
}

}  // namespace
}  // namespace uhs
