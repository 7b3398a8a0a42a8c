#pragma once

#include "uhs/core/cutoff.hpp"
#include "uhs/core/signature.hpp"

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace uhs {

/// The jet (u, conj u, grad u, grad conj u) at which quasilinear coefficients are evaluated.
struct ZState {
  Complex u{};
  Complex u_bar{};
  CVecN grad;
  CVecN grad_bar;

  static ZState zero(int n) { return {Complex{}, Complex{}, CVecN::Zero(n), CVecN::Zero(n)}; }

  /// Largest modulus among the 2n+2 components.
  double max_abs() const {
    double m = std::max(std::abs(u), std::abs(u_bar));
    for (int j = 0; j < grad.size(); ++j) m = std::max({m, std::abs(grad(j)), std::abs(grad_bar(j))});
    return m;
  }
};

enum class Family { flat, gaussian_bump, rational_decay, ring_well, quasilinear_cubic };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::flat: return "flat";
    case Family::gaussian_bump: return "gaussian_bump";
    case Family::rational_decay: return "rational_decay";
    case Family::ring_well: return "ring_well";
    case Family::quasilinear_cubic: return "quasilinear_cubic";
  }
  return "unknown";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::flat, Family::gaussian_bump, Family::rational_decay, Family::ring_well,
                   Family::quasilinear_cubic})
    if (to_string(f) == s) return f;
  throw ConfigError("model: unknown family '" + s + "'");
}

/// Closed-form family plus its numeric parameters, as read from a configuration.
struct ModelSpec {
  Family family = Family::flat;
  int n = 2;
  int k = 1;
  std::map<std::string, double> params;
  std::map<std::string, std::vector<double>> vectors;
};

/// Coefficients (a, b1, b2, c1, c2, f) of
///   u_t = -i d_j(a_jk d_k u) + b1.grad u + b2.grad conj(u) + c1 u + c2 conj(u) + f.
/// Every family is an isotropic perturbation a = A_h + sigma(x,t,z) I, multiplied by a
/// radial cutoff so that all coefficients are exactly (A_h, 0, 0) for |x| >= flat_radius.
class CoefficientModel {
 public:
  CoefficientModel(const ModelSpec& spec, double flat_radius) : sig_(spec.n, spec.k), family_(spec.family) {
    if (!(flat_radius > 0.0)) throw ConfigError("model: flat radius must be positive");
    cutoff_ = {flat_radius * 8.0 / 9.0, flat_radius};
    flat_radius_ = flat_radius;
    load(spec);
  }

  static CoefficientModel flat(const Signature& sig, double flat_radius) {
    ModelSpec spec;
    spec.family = Family::flat;
    spec.n = sig.dim();
    spec.k = sig.positive();
    return {spec, flat_radius};
  }

  const Signature& signature() const { return sig_; }
  int dim() const { return sig_.dim(); }
  Family family() const { return family_; }
  double flat_radius() const { return flat_radius_; }
  int decay_exponent() const { return decay_n_; }
  int derivative_budget() const { return derivative_budget_; }
  double r0() const { return r0_; }

  bool quasilinear() const { return gamma_ != 0.0 || b1_cubic_ != 0.0; }
  bool time_dependent() const { return drift_ != 0.0 || b_drift_ != 0.0; }
  bool b1_zero() const { return b1_amp_ == Complex{} && b1_cubic_ == 0.0; }
  bool b2_zero() const { return b2_amp_ == Complex{}; }
  bool has_forcing() const { return f_amp_ != Complex{}; }

  /// Isotropic perturbation sigma(x, t, z) including the flat-zone cutoff.
  double sigma(const VecN& x, double t, const ZState* z = nullptr) const {
    const double r = x.norm();
    if (r >= flat_radius_ || family_ == Family::flat) return 0.0;
    return cutoff_.value(r) * raw_sigma(x, r, t, z);
  }

  /// Analytic d_x sigma at fixed (t, z).
  VecN sigma_gradient(const VecN& x, double t, const ZState* z = nullptr) const {
    const double r = x.norm();
    VecN g = VecN::Zero(dim());
    if (r >= flat_radius_ || family_ == Family::flat) return g;
    g = cutoff_.value(r) * raw_sigma_gradient(x, r, t, z);
    if (r > 0.0) g += cutoff_.derivative(r) * raw_sigma(x, r, t, z) * (x / r);
    return g;
  }

  MatN a(const VecN& x, double t, const ZState* z = nullptr) const {
    if (z != nullptr && quasilinear()) check_range(*z);
    MatN m = sig_.matrix();
    const double s = sigma(x, t, z);
    for (int j = 0; j < dim(); ++j) m(j, j) += s;
    return m;
  }

  /// d_{x_l} a for l = 0..n-1, analytic.
  std::array<MatN, kMaxDim> a_gradient(const VecN& x, double t, const ZState* z = nullptr) const {
    const VecN g = sigma_gradient(x, t, z);
    std::array<MatN, kMaxDim> out;
    for (int l = 0; l < dim(); ++l) out[l] = g(l) * MatN::Identity(dim(), dim());
    return out;
  }

  CVecN b1(const VecN& x, double t, const ZState* z = nullptr) const {
    Complex amp = b1_amp_;
    if (z != nullptr && b1_cubic_ != 0.0) amp += b1_cubic_ * std::norm(z->u);
    return first_order(x, t, amp, b1_dir_);
  }

  CVecN b2(const VecN& x, double t, const ZState* = nullptr) const { return first_order(x, t, b2_amp_, b2_dir_); }

  Complex c1(const VecN& x, double, Complex = {}, Complex = {}) const { return c1_amp_ * profile_b(x); }
  Complex c2(const VecN& x, double, Complex = {}, Complex = {}) const { return c2_amp_ * profile_b(x); }

  Complex forcing(const VecN& x, double) const {
    if (f_amp_ == Complex{}) return {};
    return f_amp_ * std::exp(-x.squaredNorm() / (f_width_ * f_width_));
  }

  /// sup_x <x>^N |b1(x, 0, 0)|, closed form per profile.
  double b1_decay_constant() const {
    const double amp = std::abs(b1_amp_) * b1_dir_.norm();
    if (amp == 0.0) return 0.0;
    if (family_ == Family::rational_decay) return amp;
    const double w2 = b_width_ * b_width_;
    const double u = std::max(0.0, 0.5 * decay_n_ * w2 - 1.0);
    return amp * std::exp(0.5 * decay_n_ * std::log1p(u) - u / w2);
  }

  /// Stable text form used for hashing and cache keys.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(family_) << ";n=" << sig_.dim() << ";k=" << sig_.positive() << ";flat=" << flat_radius_;
    for (const auto& [key, v] : spec_.params) os << ";" << key << "=" << v;
    for (const auto& [key, v] : spec_.vectors) {
      os << ";" << key << "=[";
      for (double c : v) os << c << ",";
      os << "]";
    }
    return os.str();
  }

  std::uint64_t hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  const ModelSpec& spec() const { return spec_; }

 private:
  void check_range(const ZState& z) const {
    const double m = z.max_abs();
    if (m > r0_) {
      std::ostringstream os;
      os << "coefficient evaluated outside the admissible ball: max |z| = " << m << " > r0 = " << r0_;
      throw RangeError(os.str(), m);
    }
  }

  double profile_a(const VecN& x, double r) const {
    switch (family_) {
      case Family::rational_decay: return std::pow(1.0 + r * r, -0.5 * decay_n_);
      case Family::ring_well: {
        const double d = r - ring_radius_;
        return std::exp(-d * d / (width_ * width_));
      }
      default: return std::exp(-x.squaredNorm() / (width_ * width_));
    }
  }

  VecN profile_a_gradient(const VecN& x, double r) const {
    switch (family_) {
      case Family::rational_decay: return -decay_n_ * std::pow(1.0 + r * r, -0.5 * decay_n_ - 1.0) * x;
      case Family::ring_well: {
        if (r == 0.0) return VecN::Zero(dim());
        const double d = r - ring_radius_;
        const double w2 = width_ * width_;
        return (-2.0 * d / w2) * std::exp(-d * d / w2) * (x / r);
      }
      default: return (-2.0 / (width_ * width_)) * std::exp(-x.squaredNorm() / (width_ * width_)) * x;
    }
  }

  double amplitude(double t) const { return rho_ * (1.0 + drift_ * t); }

  double raw_sigma(const VecN& x, double r, double t, const ZState* z) const {
    double s = (family_ == Family::ring_well ? -depth_ : amplitude(t)) * profile_a(x, r);
    if (z != nullptr && gamma_ != 0.0) s += gamma_ * quasi_weight(x) * jet_energy(*z);
    return s;
  }

  VecN raw_sigma_gradient(const VecN& x, double r, double t, const ZState* z) const {
    VecN g = (family_ == Family::ring_well ? -depth_ : amplitude(t)) * profile_a_gradient(x, r);
    if (z != nullptr && gamma_ != 0.0)
      g += gamma_ * jet_energy(*z) * (-2.0 / (width_ * width_)) * quasi_weight(x) * x;
    return g;
  }

  double quasi_weight(const VecN& x) const { return std::exp(-x.squaredNorm() / (width_ * width_)); }

  static double jet_energy(const ZState& z) { return std::norm(z.u) + z.grad.squaredNorm(); }

  double profile_b(const VecN& x) const {
    const double r = x.norm();
    if (r >= flat_radius_) return 0.0;
    const double p = family_ == Family::rational_decay ? std::pow(1.0 + r * r, -0.5 * decay_n_)
                                                        : std::exp(-x.squaredNorm() / (b_width_ * b_width_));
    return cutoff_.value(r) * p;
  }

  CVecN first_order(const VecN& x, double t, Complex amp, const VecN& dir) const {
    CVecN out = CVecN::Zero(dim());
    if (amp == Complex{}) return out;
    const Complex s = amp * (1.0 + b_drift_ * t) * profile_b(x);
    for (int j = 0; j < dim(); ++j) out(j) = s * dir(j);
    return out;
  }

  void load(const ModelSpec& spec) {
    spec_ = spec;
    static const std::set<std::string> common = {"N", "derivative_budget", "b1_re", "b1_im", "b2_re", "b2_im",
                                                 "b_width", "b_drift", "c1_re", "c1_im", "c2_re", "c2_im",
                                                 "f_re", "f_im", "f_width"};
    std::set<std::string> allowed = common;
    switch (family_) {
      case Family::flat: allowed = {"N", "derivative_budget"}; break;
      case Family::gaussian_bump: allowed.insert({"rho", "width", "drift"}); break;
      case Family::rational_decay: allowed.insert({"rho", "drift"}); break;
      case Family::ring_well: allowed.insert({"depth", "radius", "width"}); break;
      case Family::quasilinear_cubic: allowed.insert({"rho", "width", "drift", "gamma", "b1_cubic", "r0"}); break;
    }
    for (const auto& [key, v] : spec.params) {
      if (!allowed.count(key))
        throw ConfigError("model: parameter '" + key + "' is not valid for family " + to_string(family_));
      if (!std::isfinite(v)) throw ConfigError("model: parameter '" + key + "' must be finite");
    }
    for (const auto& [key, v] : spec.vectors) {
      if (family_ == Family::flat || (key != "b1_dir" && key != "b2_dir"))
        throw ConfigError("model: vector parameter '" + key + "' is not valid for family " + to_string(family_));
      if (static_cast<int>(v.size()) != spec.n) throw ConfigError("model: '" + key + "' must have n components");
    }
    auto get = [&](const char* key, double def) {
      auto it = spec.params.find(key);
      return it == spec.params.end() ? def : it->second;
    };
    auto vec = [&](const char* key) {
      VecN v = unit(spec.n, 0);
      if (auto it = spec.vectors.find(key); it != spec.vectors.end())
        for (int j = 0; j < spec.n; ++j) v(j) = it->second[j];
      return v;
    };
    decay_n_ = static_cast<int>(get("N", 8));
    derivative_budget_ = static_cast<int>(get("derivative_budget", 2));
    if (decay_n_ < 1) throw ConfigError("model: N must be a positive integer");
    if (derivative_budget_ < 1) throw ConfigError("model: derivative_budget must be a positive integer");
    rho_ = get("rho", 0.0);
    width_ = get("width", family_ == Family::ring_well ? 1.0 : 1.0);
    drift_ = get("drift", 0.0);
    depth_ = get("depth", 0.9);
    ring_radius_ = get("radius", 3.0);
    b1_amp_ = {get("b1_re", 0.0), get("b1_im", 0.0)};
    b2_amp_ = {get("b2_re", 0.0), get("b2_im", 0.0)};
    b_width_ = get("b_width", 1.0);
    b_drift_ = get("b_drift", 0.0);
    c1_amp_ = {get("c1_re", 0.0), get("c1_im", 0.0)};
    c2_amp_ = {get("c2_re", 0.0), get("c2_im", 0.0)};
    f_amp_ = {get("f_re", 0.0), get("f_im", 0.0)};
    f_width_ = get("f_width", 1.0);
    gamma_ = get("gamma", 0.0);
    b1_cubic_ = get("b1_cubic", 0.0);
    r0_ = get("r0", std::numeric_limits<double>::infinity());
    b1_dir_ = vec("b1_dir");
    b2_dir_ = vec("b2_dir");
    if (!(width_ > 0.0) || !(b_width_ > 0.0) || !(f_width_ > 0.0)) throw ConfigError("model: widths must be positive");
    if (!(r0_ > 0.0)) throw ConfigError("model: r0 must be positive");
  }

  Signature sig_;
  Family family_;
  ModelSpec spec_;
  RadialCutoff cutoff_{1.0, 2.0};
  double flat_radius_ = 1.0;
  int decay_n_ = 8;
  int derivative_budget_ = 2;
  double rho_ = 0.0, width_ = 1.0, drift_ = 0.0, depth_ = 0.9, ring_radius_ = 3.0;
  Complex b1_amp_{}, b2_amp_{}, c1_amp_{}, c2_amp_{}, f_amp_{};
  VecN b1_dir_, b2_dir_;
  double b_width_ = 1.0, b_drift_ = 0.0, f_width_ = 1.0;
  double gamma_ = 0.0, b1_cubic_ = 0.0, r0_ = 0.0;
};

/// Principal-part view of a model at z = 0, as consumed by the ray integrator.
struct PrincipalPart {
  const CoefficientModel* model;

  int dim() const { return model->dim(); }
  MatN a(const VecN& x, double t) const { return model->a(x, t); }
  std::array<MatN, kMaxDim> a_gradient(const VecN& x, double t) const { return model->a_gradient(x, t); }
  CVecN b1(const VecN& x, double t) const { return model->b1(x, t); }
};

}  // namespace uhs
