#include "uhs/diagnostics/diagnostics.hpp"

#include <gtest/gtest.h>

#include <random>

namespace uhs {
namespace {

const Grid kGrid(2, 32, 20.0);

ComplexField plane_wave(const Grid& g, int m1, int m2, Complex amp = 1.0) {
  const double dk = g.frequency_step();
  return ComplexField::from_function(g, [&](const VecN& x) {
    return amp * std::exp(kI * (m1 * dk * x(0) + m2 * dk * x(1)));
  });
}

ComplexField gaussian(const Grid& g, double width) {
  return ComplexField::from_function(g, [&](const VecN& x) {
    return std::exp(-x.squaredNorm() / (width * width)) * std::exp(kI * 0.4 * x(1));
  });
}

CoefficientModel bump(std::map<std::string, double> params) {
  ModelSpec s;
  s.family = Family::gaussian_bump;
  s.params = std::move(params);
  return {s, 18.0};
}

SolverConfig config(double eps, double dt, double T) {
  SolverConfig c;
  c.epsilon = eps;
  c.dt = dt;
  c.T = T;
  c.grid = kGrid;
  c.record_every = 1;
  return c;
}

TEST(SmoothingFunctional, ZeroAndTooFewSnapshots) {
  const auto z = ComplexField::zeros(kGrid);
  EXPECT_EQ(smoothing_functional({z, z, z}, 0.5, 0.5, 2.0), 0.0);
  EXPECT_THROW(smoothing_functional({z}, 0.5, 0.5, 2.0), PreconditionError);
}

TEST(SmoothingFunctional, ConstantPlaneWaveClosedForm) {
  const auto u = plane_wave(kGrid, 3, 1);
  const double s = 0.5, nt = 2.0;
  const double xi2 = std::pow(kGrid.frequency_step(), 2) * 10.0;
  // Closed form: <xi0>^{2s} h^n sum_x <x>^{-Ntilde}, times the unit time interval.
  double w = 0.0;
  for (std::size_t i = 0; i < kGrid.size(); ++i) w += std::pow(1.0 + kGrid.point(i).squaredNorm(), -0.5 * nt);
  const double expect = std::pow(1.0 + xi2, s) * w * kGrid.cell_volume();
  std::vector<ComplexField> snaps(11, u);
  EXPECT_NEAR(smoothing_functional(snaps, 0.1, s, nt) / expect, 1.0, 1e-10);
}

TEST(SmoothingFunctional, RefinementOfSnapshotIntervalIsStable) {
  const auto m = bump({{"rho", 0.2}});
  auto c = config(1e-2, 0.01, 0.5);
  c.store_snapshots = true;
  c.record_every = 1;
  const auto fine = solve_linear({&m, gaussian(kGrid, 2.0), {}}, c);
  std::vector<ComplexField> coarse;
  for (std::size_t i = 0; i < fine.snapshots.size(); i += 2) coarse.push_back(fine.snapshots[i]);
  const double a = smoothing_functional(fine, 0.5, 2.0);
  const double b = smoothing_functional(coarse, 0.02, 0.5, 2.0);
  EXPECT_LT(std::abs(a - b) / a, 1e-4);
}

TEST(SmoothingEstimate, FlatModelSupPartIsIsometric) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  const LinearProblem p{&m, gaussian(kGrid, 3.0), {}};
  std::vector<SolverConfig> sweep;
  for (double eps : {1e-2, 1e-3, 1e-4}) sweep.push_back(config(eps, 0.05, 1.0));
  const auto chk = smoothing_estimate_check(p, sweep);
  ASSERT_EQ(chk.runs.size(), 3u);
  for (const auto& r : chk.runs) EXPECT_NEAR(r.sup_norm / r.rhs, 1.0, 1e-6);
  EXPECT_TRUE(chk.report.bounded);
}

TEST(SmoothingEstimate, SmallB1SweepIsUniformForBothRhsForms) {
  const auto m = bump({{"rho", 0.1}, {"b1_im", 0.05}, {"f_re", 0.2}});
  const LinearProblem p{&m, gaussian(kGrid, 2.0), {}};
  std::vector<SolverConfig> sweep;
  for (double eps : {1e-2, 1e-3, 1e-4}) sweep.push_back(config(eps, 0.05, 1.0));
  for (SmoothingRhs form : {SmoothingRhs::forcing_l1, SmoothingRhs::forcing_weighted}) {
    SmoothingCheckOptions opt;
    opt.rhs = form;
    const auto chk = smoothing_estimate_check(p, sweep, opt);
    EXPECT_TRUE(chk.report.bounded) << chk.report.parameters.at("ratio_variation");
    EXPECT_NEAR(chk.report.ratio, chk.report.lhs / chk.report.rhs, 1e-15);
  }
}

TEST(SmoothingEstimate, RejectsMismatchedSweep) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  std::vector<SolverConfig> sweep{config(1e-2, 0.05, 1.0), config(1e-3, 0.05, 2.0)};
  EXPECT_THROW(smoothing_estimate_check({&m, gaussian(kGrid, 2.0), {}}, sweep), PreconditionError);
}

TEST(Interpolation, PlaneWaveSaturatesAndZeroIsZero) {
  for (auto [a, b] : {std::pair{1, 0}, std::pair{3, -5}, std::pair{7, 2}})
    EXPECT_NEAR(interpolation_ratio(plane_wave(kGrid, a, b, {0.3, -2.0})), 1.0, 1e-10);
  EXPECT_EQ(interpolation_ratio(ComplexField::zeros(kGrid)), 0.0);
}

TEST(Interpolation, RandomFieldsNeverExceedOne) {
  const Grid g(2, 16, 5.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<ComplexField> fields;
  for (int k = 0; k < 500; ++k) {
    std::vector<Complex> v(g.size());
    for (auto& z : v) z = {nd(rng), nd(rng)};
    fields.emplace_back(g, std::move(v));
  }
  const auto rep = interpolation_check(fields);
  EXPECT_TRUE(rep.bounded);
  EXPECT_LT(rep.ratio, 1.0);
}

TEST(KStarTrack, ZeroB1ReproducesTheNorm) {
  const auto m = bump({{"rho", 0.2}});
  auto c = config(1e-2, 0.05, 0.3);
  c.store_snapshots = true;
  const auto rec = solve_linear({&m, gaussian(kGrid, 2.0), {}}, c);
  const auto f = integrating_factor(truncate(m, 4.0, kGrid), {}, &kGrid);
  const KOperators ops(f, kGrid);
  const auto tr = kstar_energy_track(rec, &ops);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    EXPECT_NEAR(tr.kstar[i], tr.l2[i], 1e-12);
    EXPECT_LE(tr.er[i], 1e-12);
  }
  EXPECT_TRUE(tr.report.bounded);
  EXPECT_THROW(kstar_energy_track(rec, nullptr), ConfigError);
}

TEST(KStarTrack, ReconstructionBoundAndStableGrowthRate) {
  const Grid g(2, 16, 8.0);
  ModelSpec s;
  s.family = Family::gaussian_bump;
  s.params = {{"rho", 0.0}, {"b1_im", 0.05}};
  const CoefficientModel m(s, 7.2);
  const auto f = integrating_factor(truncate(m, 3.0, g), {}, &g);
  const KOperators ops(f, g);
  const auto u0 = ComplexField::from_function(g, [](const VecN& x) { return std::exp(-x.squaredNorm() / 4.0); });
  std::vector<double> k0;
  for (double dt : {0.02, 0.01}) {
    SolverConfig c;
    c.grid = g;
    c.epsilon = 1e-2;
    c.dt = dt;
    c.T = 0.4;
    c.record_every = static_cast<int>(std::lround(0.04 / dt));
    c.store_snapshots = true;
    const auto rec = solve_linear({&m, u0, {}}, c);
    const auto tr = kstar_energy_track(rec, &ops);
    EXPECT_TRUE(tr.report.bounded) << tr.report.parameters.at("max_residual");
    EXPECT_TRUE(std::isfinite(tr.k0));
    k0.push_back(tr.k0);
  }
  EXPECT_NEAR(k0[0], k0[1], 1e-3 + 0.05 * std::abs(k0[1]));
}

TEST(GardingProbe, FlatModelMatchesHamiltonDerivative) {
  const auto m = CoefficientModel::flat(Signature(2, 1), 18.0);
  const auto p = escape_function_flat(m.signature(), 2.0);
  const auto rep = garding_commutator_probe(m, p, 0.0, kGrid);
  EXPECT_TRUE(rep.bounded);
  EXPECT_GT(rep.parameters.at("margin"), 0.0);
  EXPECT_DOUBLE_EQ(rep.parameters.at("margin"), rep.parameters.at("diagonal_margin"));
}

TEST(GardingProbe, SmallBIsBoundedAndOversizedBIsViolated) {
  const auto p = escape_function_flat(Signature(2, 1), 2.0);
  const auto small = bump({{"rho", 0.0}, {"b1_im", 0.05}});
  const auto big = bump({{"rho", 0.0}, {"b1_im", 5.0}});
  EXPECT_TRUE(garding_commutator_probe(small, p, 0.0, kGrid).bounded);
  EXPECT_FALSE(garding_commutator_probe(big, p, 0.0, kGrid).bounded);
  // A real b1 is skew and never enters the Hermitian part.
  const auto real_b = bump({{"rho", 0.0}, {"b1_re", 5.0}});
  EXPECT_TRUE(garding_commutator_probe(real_b, p, 0.0, kGrid).bounded);
}

TEST(Ichinose, HeuristicIsZeroForRealOrAbsentB1) {
  EXPECT_EQ(ichinose_heuristic(bump({{"rho", 0.0}})), 0.0);
  EXPECT_NEAR(ichinose_heuristic(bump({{"rho", 0.0}, {"b1_re", 0.3}})), 0.0, 1e-12);
  EXPECT_GT(ichinose_heuristic(bump({{"rho", 0.0}, {"b1_im", 0.3}})), 0.1);
}

}  // namespace
}  // namespace uhs
