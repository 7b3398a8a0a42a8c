#pragma once

#include "uhs/core/coefficients.hpp"
#include "uhs/rays/flow.hpp"
#include "uhs/solver/solver.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <set>

namespace uhs::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

/// Initial datum: Gaussian packet amplitude * exp(-|x - c|^2 / w^2 + i k.x), a lattice plane
/// wave, or zero.
struct InitialSpec {
  std::string kind = "gaussian";
  double amplitude = 1.0;
  double width = 2.0;
  std::vector<double> center;
  std::vector<double> wavevector;
  std::vector<int> modes;
};

struct RaySeedSpec {
  std::vector<double> x, xi;
};

struct RaysSpec {
  std::vector<RaySeedSpec> seeds;
  double s_max = 10.0;
  double rho_escape = 0.0;  ///< 0: 1.5 * flat radius
  double tol = 1e-10;
};

struct DiagnosticsSpec {
  std::vector<std::string> select;
  int interpolation_fields = 100;
  std::size_t garding_samples = 10000;
  double garding_t = 0.0;
  double garding_scale = 1.0;
  std::string smoothing_rhs = "forcing_l1";
  double radius = 4.0;  ///< truncation radius R for the K/E chain
};

struct SweepSpec {
  std::vector<double> epsilon, radius, amplitude;
  std::vector<int> points;
};

struct ExperimentConfig {
  ModelSpec model;
  double flat_radius = 0.0;  ///< 0: 0.9 L
  int points = 128;
  double half_width = 20.0;
  SolverConfig solver;
  bool quasilinear = false;
  InitialSpec initial;
  RaysSpec rays;
  DiagnosticsSpec diagnostics;
  SweepSpec sweep;
  std::uint64_t seed = 0;
  std::string output = "uhs_out";
  json source;  ///< validated document, used for hashing

  Grid grid() const { return {model.n, points, half_width}; }
  double model_flat_radius() const { return flat_radius > 0.0 ? flat_radius : 0.9 * half_width; }
  CoefficientModel build_model() const { return {model, model_flat_radius()}; }
};

/// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Hash of the canonical dump; nlohmann objects keep keys sorted, so key order in the file
/// does not matter.
inline std::string config_hash(const json& j) { return hex(fnv1a(j.dump())); }

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError("config: unknown key '" + path_ + it.key() + "'");
  }

  bool has(const char* k) const { return j_.contains(k); }

  template <class T>
  void get(const char* k, T& out) const {
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: '" + path_ + k + "' has the wrong type (" + e.what() + ")");
    }
  }

  Reader child(const char* k) const { return {j_.at(k), path_ + k + "."}; }
  const json& at(const char* k) const { return j_.at(k); }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("config: '" + (path_.empty() ? std::string("<root>") : path_) + "' " + msg);
  }

 private:
  const json& j_;
  std::string path_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

}  // namespace detail

/// Validates a parsed document against schema version 1 and builds the typed config.
inline ExperimentConfig parse_config(const json& doc) {
  using detail::Reader;
  using detail::require;
  Reader root(doc, "");
  root.allow({"schema_version", "model", "grid", "solver", "initial", "rays", "diagnostics", "sweep", "seed",
              "output"});
  int version = 0;
  root.get("schema_version", version);
  require(version == kSchemaVersion, "schema_version must be " + std::to_string(kSchemaVersion));
  require(root.has("model"), "missing 'model'");

  ExperimentConfig c;
  c.source = doc;
  {
    Reader m = root.child("model");
    m.allow({"family", "n", "k", "flat_radius", "params", "vectors"});
    std::string fam = "flat";
    m.get("family", fam);
    c.model.family = parse_family(fam);
    m.get("n", c.model.n);
    m.get("k", c.model.k);
    m.get("flat_radius", c.flat_radius);
    m.get("params", c.model.params);
    m.get("vectors", c.model.vectors);
  }
  if (root.has("grid")) {
    Reader g = root.child("grid");
    g.allow({"M", "L"});
    g.get("M", c.points);
    g.get("L", c.half_width);
  }
  c.solver.grid = Grid(c.model.n, c.points, c.half_width);
  if (root.has("solver")) {
    Reader s = root.child("solver");
    s.allow({"epsilon", "dt", "T", "scheme", "record_every", "stability_budget", "sobolev_orders", "weighted_pairs",
             "Ntilde", "store_snapshots", "check_self_adjoint", "quasilinear"});
    s.get("epsilon", c.solver.epsilon);
    s.get("dt", c.solver.dt);
    s.get("T", c.solver.T);
    std::string scheme = "imex_rk2";
    s.get("scheme", scheme);
    c.solver.scheme = parse_scheme(scheme);
    s.get("record_every", c.solver.record_every);
    s.get("stability_budget", c.solver.stability_budget);
    s.get("sobolev_orders", c.solver.sobolev_orders);
    s.get("weighted_pairs", c.solver.weighted_pairs);
    s.get("Ntilde", c.solver.ntilde);
    s.get("store_snapshots", c.solver.store_snapshots);
    s.get("check_self_adjoint", c.solver.check_self_adjoint);
    s.get("quasilinear", c.quasilinear);
  }
  if (root.has("initial")) {
    Reader i = root.child("initial");
    i.allow({"kind", "amplitude", "width", "center", "wavevector", "modes"});
    i.get("kind", c.initial.kind);
    i.get("amplitude", c.initial.amplitude);
    i.get("width", c.initial.width);
    i.get("center", c.initial.center);
    i.get("wavevector", c.initial.wavevector);
    i.get("modes", c.initial.modes);
    require(c.initial.kind == "gaussian" || c.initial.kind == "plane_wave" || c.initial.kind == "zero",
            "initial.kind must be gaussian, plane_wave or zero");
  }
  if (root.has("rays")) {
    Reader r = root.child("rays");
    r.allow({"seeds", "s_max", "rho_escape", "tol"});
    r.get("s_max", c.rays.s_max);
    r.get("rho_escape", c.rays.rho_escape);
    r.get("tol", c.rays.tol);
    if (r.has("seeds")) {
      const json& seeds = r.at("seeds");
      require(seeds.is_array(), "rays.seeds must be an array");
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        Reader sd(seeds[k], "rays.seeds[" + std::to_string(k) + "].");
        sd.allow({"x", "xi"});
        RaySeedSpec s;
        sd.get("x", s.x);
        sd.get("xi", s.xi);
        require(static_cast<int>(s.x.size()) == c.model.n && static_cast<int>(s.xi.size()) == c.model.n,
                "rays.seeds entries need n-component x and xi");
        c.rays.seeds.push_back(std::move(s));
      }
    }
  }
  if (root.has("diagnostics")) {
    Reader d = root.child("diagnostics");
    d.allow({"select", "interpolation_fields", "garding_samples", "garding_t", "garding_scale", "smoothing_rhs", "R"});
    d.get("select", c.diagnostics.select);
    d.get("interpolation_fields", c.diagnostics.interpolation_fields);
    d.get("garding_samples", c.diagnostics.garding_samples);
    d.get("garding_t", c.diagnostics.garding_t);
    d.get("garding_scale", c.diagnostics.garding_scale);
    d.get("smoothing_rhs", c.diagnostics.smoothing_rhs);
    d.get("R", c.diagnostics.radius);
    static const std::set<std::string> known = {"interpolation", "smoothing", "garding", "kstar", "ichinose",
                                                "continuation"};
    for (const auto& s : c.diagnostics.select) require(known.count(s), "unknown diagnostic '" + s + "'");
    require(c.diagnostics.smoothing_rhs == "forcing_l1" || c.diagnostics.smoothing_rhs == "forcing_weighted",
            "diagnostics.smoothing_rhs must be forcing_l1 or forcing_weighted");
  }
  if (root.has("sweep")) {
    Reader w = root.child("sweep");
    w.allow({"epsilon", "R", "M", "amplitude"});
    w.get("epsilon", c.sweep.epsilon);
    w.get("R", c.sweep.radius);
    w.get("M", c.sweep.points);
    w.get("amplitude", c.sweep.amplitude);
  }
  root.get("seed", c.seed);
  root.get("output", c.output);
  require(!c.output.empty(), "output must be a non-empty path");
  // Constructing the model and grid runs their own validation.
  (void)c.build_model();
  (void)c.grid();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return parse_config(doc);
}

/// Initial field on a grid with the given amplitude.
inline ComplexField make_initial(const InitialSpec& s, const Grid& g, double amplitude) {
  const int n = g.dim();
  if (s.kind == "zero") return ComplexField::zeros(g);
  if (s.kind == "plane_wave") {
    if (static_cast<int>(s.modes.size()) != n) throw ConfigError("config: initial.modes needs n entries");
    VecN xi(n);
    for (int d = 0; d < n; ++d) xi(d) = s.modes[d] * g.frequency_step();
    return ComplexField::from_function(g, [&](const VecN& x) { return amplitude * std::exp(kI * xi.dot(x)); });
  }
  VecN c = VecN::Zero(n), k = VecN::Zero(n);
  if (!s.center.empty()) {
    if (static_cast<int>(s.center.size()) != n) throw ConfigError("config: initial.center needs n entries");
    for (int d = 0; d < n; ++d) c(d) = s.center[d];
  }
  if (!s.wavevector.empty()) {
    if (static_cast<int>(s.wavevector.size()) != n) throw ConfigError("config: initial.wavevector needs n entries");
    for (int d = 0; d < n; ++d) k(d) = s.wavevector[d];
  }
  const double w2 = s.width * s.width;
  return ComplexField::from_function(g, [&](const VecN& x) {
    return amplitude * std::exp(-(x - c).squaredNorm() / w2 + kI * k.dot(x));
  });
}

/// One entry of the expanded sweep.
struct RunSpec {
  double epsilon;
  double amplitude;
  int points;
  std::string key;  ///< hash of the config plus the entry
};

inline std::vector<RunSpec> expand_sweep(const ExperimentConfig& c) {
  auto or_default = [](auto v, auto d) {
    using T = typename decltype(v)::value_type;
    return v.empty() ? std::vector<T>{static_cast<T>(d)} : v;
  };
  const auto eps = or_default(c.sweep.epsilon, c.solver.epsilon);
  const auto amp = or_default(c.sweep.amplitude, c.initial.amplitude);
  const auto pts = or_default(c.sweep.points, c.points);
  std::vector<RunSpec> out;
  const std::string base = config_hash(c.source);
  for (double e : eps)
    for (double a : amp)
      for (int m : pts) {
        json j = {{"config", base}, {"epsilon", e}, {"amplitude", a}, {"M", m}};
        out.push_back({e, a, m, config_hash(j)});
      }
  return out;
}

/// Truncation radii of the K/E diagnostics. A solve does not depend on R, so R is not part of
/// the run key.
inline std::vector<double> sweep_radii(const ExperimentConfig& c) {
  return c.sweep.radius.empty() ? std::vector<double>{c.diagnostics.radius} : c.sweep.radius;
}

}  // namespace uhs::io
