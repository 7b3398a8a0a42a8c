#pragma once

#include "uhs/core/coefficients.hpp"
#include "uhs/rays/dopri.hpp"

#include <optional>

namespace uhs {

struct PhasePoint {
  VecN x;
  VecN xi;

  PhasePoint(VecN x_, VecN xi_) : x(std::move(x_)), xi(std::move(xi_)) {
    if (x.size() != xi.size()) throw PreconditionError("phase point: x and xi must have equal dimension");
    if (!(xi.norm() > 0.0)) throw DomainError("phase point: xi must be non-zero");
  }
};

/// Anything exposing dim(), a(x, t) and a_gradient(x, t): a CoefficientModel,
/// its PrincipalPart view, or a truncated operator.
template <class P>
concept PrincipalSymbol = requires(const P& p, const VecN& x, double t) {
  { p.dim() } -> std::convertible_to<int>;
  { p.a(x, t) } -> std::convertible_to<MatN>;
  p.a_gradient(x, t);
};

template <PrincipalSymbol P>
double hamiltonian(const P& model, double t, const VecN& x, const VecN& xi) {
  return xi.dot(model.a(x, t) * xi);
}

struct PhaseVelocity {
  VecN dx;
  VecN dxi;
};

/// dx_j = 2 a_jk xi_k, dxi_j = -(d_j a_lk) xi_k xi_l with the analytic gradient.
template <PrincipalSymbol P>
PhaseVelocity hamiltonian_field(const P& model, double t, const PhasePoint& p) {
  const int n = model.dim();
  PhaseVelocity v{2.0 * model.a(p.x, t) * p.xi, VecN(n)};
  const auto grad = model.a_gradient(p.x, t);
  for (int j = 0; j < n; ++j) v.dxi(j) = -p.xi.dot(grad[j] * p.xi);
  return v;
}

/// Same field with d_x a by central differences of step `step`; a cross-check of the analytic path.
template <PrincipalSymbol P>
PhaseVelocity hamiltonian_field_fd(const P& model, double t, const PhasePoint& p, double step = 1e-5) {
  const int n = model.dim();
  PhaseVelocity v{2.0 * model.a(p.x, t) * p.xi, VecN(n)};
  for (int j = 0; j < n; ++j) {
    VecN xp = p.x, xm = p.x;
    xp(j) += step;
    xm(j) -= step;
    v.dxi(j) = -p.xi.dot((model.a(xp, t) - model.a(xm, t)) * p.xi) / (2.0 * step);
  }
  return v;
}

enum class Termination { escape, time_budget, step_failure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::escape: return "escape";
    case Termination::time_budget: return "time_budget";
    case Termination::step_failure: return "step_failure";
  }
  return "unknown";
}

struct RaySample {
  double s;
  VecN X;
  VecN Xi;
  double h_drift;
};

struct RayTrajectory {
  std::vector<RaySample> samples;
  double h_initial = 0.0;
  double h_drift_max = 0.0;
  Termination terminated_by = Termination::time_budget;
  /// Accumulated line integral at each breakpoint below s_max in increasing order, then at
  /// s_max (empty without an integrand).
  std::vector<Complex> integrals;

  const RaySample& back() const { return samples.back(); }
};

/// Integrand of an optional line integral carried along the ray: g(X, Xi) -> C.
using RayIntegrand = std::function<Complex(const VecN&, const VecN&)>;

struct RayOptions {
  double s_max = 10.0;
  double rho_escape = std::numeric_limits<double>::infinity();
  double tol = 1e-10;
  double t = 0.0;          ///< coefficients are frozen at this time
  bool backward = false;   ///< integrate s from 0 down to -s_max
  double h_max = 1.0;
  bool store_samples = true;
  RayIntegrand integrand;  ///< accumulated in |s|
  std::vector<double> breakpoints;  ///< values of |s| at which the integral is recorded
};

/// Adaptive Dormand-Prince integration of the bicharacteristic system with optional
/// augmented quadrature. Step underflow ends the ray with step_failure, never throws.
template <PrincipalSymbol P>
RayTrajectory integrate_ray(const P& model, const PhasePoint& start, const RayOptions& opt) {
  if (!(opt.tol >= 1e-12 && opt.tol <= 1e-6)) throw PreconditionError("integrate_ray: tol must lie in [1e-12, 1e-6]");
  if (!(opt.s_max >= 0.0)) throw PreconditionError("integrate_ray: s_max must be non-negative");
  const int n = model.dim();
  if (start.x.size() != n) throw PreconditionError("integrate_ray: dimension mismatch");
  const bool aug = static_cast<bool>(opt.integrand);
  const double dir = opt.backward ? -1.0 : 1.0;

  ode::State y(2 * n + (aug ? 2 : 0));
  y.head(n) = start.x;
  y.segment(n, n) = start.xi;
  if (aug) y.tail(2).setZero();

  auto rhs = [&](double, const ode::State& st) {
    const VecN x = st.head(n), xi = st.segment(n, n);
    const MatN a = model.a(x, opt.t);
    const auto grad = model.a_gradient(x, opt.t);
    ode::State d(st.size());
    d.head(n) = dir * 2.0 * a * xi;
    for (int j = 0; j < n; ++j) d(n + j) = -dir * xi.dot(grad[j] * xi);
    if (aug) {
      const Complex g = opt.integrand(x, xi);
      d(2 * n) = g.real();
      d(2 * n + 1) = g.imag();
    }
    return d;
  };

  RayTrajectory traj;
  traj.h_initial = hamiltonian(model, opt.t, start.x, start.xi);
  const double h_scale = std::max(1.0, std::abs(traj.h_initial));
  traj.samples.push_back({0.0, start.x, start.xi, 0.0});

  auto observe = [&](double tau, const ode::State& st) {
    const VecN x = st.head(n), xi = st.segment(n, n);
    const double drift = std::abs(hamiltonian(model, opt.t, x, xi) - traj.h_initial) / h_scale;
    traj.h_drift_max = std::max(traj.h_drift_max, drift);
    RaySample smp{dir * tau, x, xi, drift};
    const bool out = x.norm() > opt.rho_escape;
    if (opt.store_samples || out || traj.samples.size() == 1)
      traj.samples.push_back(std::move(smp));
    else
      traj.samples.back() = std::move(smp);
    if (out) {
      traj.terminated_by = Termination::escape;
      return false;
    }
    return true;
  };

  std::vector<double> stops;
  for (double b : opt.breakpoints)
    if (b > 0.0 && b < opt.s_max) stops.push_back(b);
  std::sort(stops.begin(), stops.end());
  stops.push_back(opt.s_max);

  ode::Options o{opt.tol, opt.h_max, 1e-14};
  double h = 0.0, tau = 0.0;
  traj.terminated_by = Termination::time_budget;
  for (double stop : stops) {
    const auto status = ode::dopri5(rhs, y, tau, stop, h, o, observe);
    if (status == ode::Status::stopped) break;
    if (status == ode::Status::underflow || status == ode::Status::nonfinite) {
      traj.terminated_by = Termination::step_failure;
      break;
    }
    tau = stop;
    if (aug) traj.integrals.emplace_back(y(2 * n), y(2 * n + 1));
  }
  if (aug) {
    // Stops not reached carry the last value; beyond escape the caller's integrand is
    // expected to vanish.
    const Complex last(y(2 * n), y(2 * n + 1));
    while (traj.integrals.size() < stops.size()) traj.integrals.push_back(last);
  }
  return traj;
}

template <PrincipalSymbol P>
RayTrajectory integrate_ray(const P& model, const PhasePoint& start, double s_max, double rho_escape, double tol) {
  RayOptions opt;
  opt.s_max = s_max;
  opt.rho_escape = rho_escape;
  opt.tol = tol;
  return integrate_ray(model, start, opt);
}

struct TrappingVerdict {
  bool escaped = false;
  double s_exit = 0.0;   ///< meaningful when escaped
  double rho_escape = 0.0;
  double s_max = 0.0;
  bool step_failure = false;
  double h_drift_max = 0.0;
};

/// Escaped verdicts are conclusive: beyond the flat radius the flow is a straight line.
/// Rays that exhaust the budget are undecided; there is no trapped verdict.
template <PrincipalSymbol P>
std::vector<TrappingVerdict> classify_trapping(const P& model, const std::vector<PhasePoint>& seeds, double s_max,
                                               double rho_escape, double flat_radius, double tol = 1e-10,
                                               unsigned jobs = 1) {
  if (rho_escape < flat_radius)
    throw PreconditionError("classify_trapping: rho_escape must be at least the flat radius of the coefficients");
  std::vector<TrappingVerdict> out(seeds.size());
  parallel_for(
      seeds.size(),
      [&](std::size_t i) {
        RayOptions opt;
        opt.s_max = s_max;
        opt.rho_escape = rho_escape;
        opt.tol = tol;
        opt.store_samples = false;
        const auto tr = integrate_ray(model, seeds[i], opt);
        TrappingVerdict v;
        v.escaped = tr.terminated_by == Termination::escape;
        v.s_exit = v.escaped ? tr.back().s : 0.0;
        v.rho_escape = rho_escape;
        v.s_max = s_max;
        v.step_failure = tr.terminated_by == Termination::step_failure;
        v.h_drift_max = tr.h_drift_max;
        out[i] = v;
      },
      jobs);
  return out;
}

template <PrincipalSymbol P>
std::vector<TrappingVerdict> classify_trapping(const P& model, const std::vector<PhasePoint>& seeds, double s_max,
                                               double rho_escape) {
  return classify_trapping(model, seeds, s_max, rho_escape, model.flat_radius());
}

struct IchinoseResult {
  double value = 0.0;                 ///< max over kept samples and R of |Im int_0^R b1(X).Xi ds|
  std::vector<std::size_t> excluded;  ///< samples whose ray ended in step_failure
};

struct IchinoseSample {
  VecN x;
  VecN omega;  ///< unit direction
};

/// The R values are breakpoints of a single augmented integration per sample.
inline IchinoseResult ichinose_functional(const CoefficientModel& model, const std::vector<IchinoseSample>& samples,
                                          const std::vector<double>& r_values, double tol = 1e-12, double t = 0.0) {
  IchinoseResult res;
  if (r_values.empty() || model.b1_zero()) return res;
  const double r_max = *std::max_element(r_values.begin(), r_values.end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    RayOptions opt;
    opt.s_max = r_max;
    opt.tol = tol;
    opt.t = t;
    opt.store_samples = false;
    opt.breakpoints = r_values;
    opt.integrand = [&](const VecN& x, const VecN& xi) { return (model.b1(x, t).array() * xi.cast<Complex>().array()).sum(); };
    const auto tr = integrate_ray(model, PhasePoint(samples[i].x, samples[i].omega), opt);
    if (tr.terminated_by == Termination::step_failure) {
      res.excluded.push_back(i);
      continue;
    }
    for (const Complex& v : tr.integrals) res.value = std::max(res.value, std::abs(v.imag()));
  }
  return res;
}

}  // namespace uhs

namespace uhs {

/// Radius of a circular ray of an isotropic elliptic model a = g(|x|) I, the root of
/// 2 g(r) = r g'(r) bracketed in [r_lo, r_hi]. Launching at (r, 0) with xi = (0, 1) stays
/// on the circle when the root is a local maximum of r^2 / g.
inline double circular_orbit_radius(const CoefficientModel& model, double r_lo, double r_hi) {
  if (!model.signature().elliptic()) throw PreconditionError("circular_orbit_radius: elliptic model required");
  auto balance = [&](double r) {
    const VecN x = r * unit(model.dim(), 0);
    const double g = 1.0 + model.sigma(x, 0.0);
    return 2.0 * g - r * model.sigma_gradient(x, 0.0)(0);
  };
  double flo = balance(r_lo);
  if (flo * balance(r_hi) > 0.0) throw PreconditionError("circular_orbit_radius: root not bracketed");
  for (int it = 0; it < 200 && r_hi - r_lo > 1e-15 * r_hi; ++it) {
    const double mid = 0.5 * (r_lo + r_hi);
    const double fm = balance(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      r_lo = mid;
      flo = fm;
    } else {
      r_hi = mid;
    }
  }
  return 0.5 * (r_lo + r_hi);
}

}  // namespace uhs
