#pragma once

#include "uhs/diagnostics/diagnostics.hpp"
#include "uhs/io/config.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace uhs::io {

namespace fs = std::filesystem;

/// Writes through a sibling temp file and renames it into place.
inline void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("io: cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("io: short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("io: cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- RunRecord: JSON metadata + CSV time series ------------------------------------------------

inline json solver_json(const SolverConfig& c) {
  return {{"epsilon", c.epsilon},
          {"dt", c.dt},
          {"dt_effective", c.step()},
          {"steps", c.steps()},
          {"T", c.T},
          {"scheme", to_string(c.scheme)},
          {"M", c.grid.points()},
          {"L", c.grid.half_width()},
          {"n", c.grid.dim()},
          {"record_every", c.record_every},
          {"stability_budget", c.stability_budget},
          {"sobolev_orders", c.sobolev_orders},
          {"weighted_pairs", c.weighted_pairs},
          {"Ntilde", c.ntilde}};
}

/// Column names of the time-series CSV for a config (schema version 1).
inline std::vector<std::string> record_columns(const SolverConfig& c) {
  std::vector<std::string> cols{"t", "l2"};
  for (double s : c.sobolev_orders) cols.push_back("sobolev_s" + json(s).dump());
  for (const auto& [s, r] : c.weighted_pairs) cols.push_back("weighted_s" + json(s).dump() + "_r" + json(r).dump());
  for (const char* k : {"smoothing_density", "smoothing_increment", "kstar", "er", "laplacian"}) cols.emplace_back(k);
  return cols;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string record_csv(const RunRecord& rec) {
  std::ostringstream os;
  const auto cols = record_columns(rec.config);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rec.rows) {
    std::vector<double> v{r.t, r.l2};
    v.insert(v.end(), r.sobolev.begin(), r.sobolev.end());
    v.insert(v.end(), r.weighted.begin(), r.weighted.end());
    for (double x : {r.smoothing_density, r.smoothing_increment, r.kstar, r.er, r.laplacian}) v.push_back(x);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_double(v[i]);
    os << "\n";
  }
  return os.str();
}

inline json record_json(const RunRecord& rec, const std::string& key, const json& extra = json::object()) {
  json j = {{"schema_version", kSchemaVersion},
            {"run_key", key},
            {"model", rec.model_canonical},
            {"solver", solver_json(rec.config)},
            {"termination", to_string(rec.termination)},
            {"message", rec.message},
            {"end_time", rec.end_time},
            {"rows", rec.rows.size()},
            {"columns", record_columns(rec.config)},
            {"max_self_adjoint_residual", rec.max_self_adjoint_residual},
            {"final_l2", rec.rows.empty() ? 0.0 : rec.rows.back().l2}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

/// Parsed CSV: header plus numeric rows ("nan" allowed).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::runtime_error("io: missing column " + name);
  }
};

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ls(s);
    while (std::getline(ls, cur, ',')) out.push_back(cur);
    return out;
  };
  if (std::getline(in, line)) t.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line))
      row.push_back(f == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// --- field snapshots --------------------------------------------------------------------------

/// 32-byte header: magic "UHSF", version u32, n u32, M u32, t f64, L f64; then M^n complex<f64>.
inline std::string snapshot_bytes(const ComplexField& f, double t) {
  std::string out(32, '\0');
  const std::uint32_t version = 1, n = f.grid().dim(), m = f.grid().points();
  const double l = f.grid().half_width();
  std::memcpy(out.data(), "UHSF", 4);
  std::memcpy(out.data() + 4, &version, 4);
  std::memcpy(out.data() + 8, &n, 4);
  std::memcpy(out.data() + 12, &m, 4);
  std::memcpy(out.data() + 16, &t, 8);
  std::memcpy(out.data() + 24, &l, 8);
  const auto* p = reinterpret_cast<const char*>(f.data().data());
  out.append(p, f.size() * sizeof(Complex));
  return out;
}

inline std::pair<ComplexField, double> read_snapshot(const std::string& bytes) {
  if (bytes.size() < 32 || bytes.compare(0, 4, "UHSF") != 0) throw std::runtime_error("io: not a snapshot file");
  std::uint32_t version, n, m;
  double t, l;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&n, bytes.data() + 8, 4);
  std::memcpy(&m, bytes.data() + 12, 4);
  std::memcpy(&t, bytes.data() + 16, 8);
  std::memcpy(&l, bytes.data() + 24, 8);
  if (version != 1) throw std::runtime_error("io: unsupported snapshot version");
  const Grid g(static_cast<int>(n), static_cast<int>(m), l);
  if (bytes.size() != 32 + g.size() * sizeof(Complex)) throw std::runtime_error("io: truncated snapshot");
  std::vector<Complex> v(g.size());
  std::memcpy(v.data(), bytes.data() + 32, g.size() * sizeof(Complex));
  return {ComplexField(g, std::move(v)), t};
}

// --- rays ------------------------------------------------------------------------------------

inline std::string trajectory_csv(const RayTrajectory& tr) {
  std::ostringstream os;
  const int n = tr.samples.empty() ? 0 : static_cast<int>(tr.samples.front().X.size());
  os << "s";
  for (int d = 0; d < n; ++d) os << ",x" << d;
  for (int d = 0; d < n; ++d) os << ",xi" << d;
  os << ",h_drift\n";
  for (const auto& s : tr.samples) {
    os << format_double(s.s);
    for (int d = 0; d < n; ++d) os << "," << format_double(s.X(d));
    for (int d = 0; d < n; ++d) os << "," << format_double(s.Xi(d));
    os << "," << format_double(s.h_drift) << "\n";
  }
  return os.str();
}

inline json verdict_json(const TrappingVerdict& v) {
  return {{"escaped", v.escaped},
          {"s_exit", v.escaped ? json(v.s_exit) : json(nullptr)},
          {"rho_escape", v.rho_escape},
          {"s_max", v.s_max},
          {"step_failure", v.step_failure},
          {"h_drift_max", v.h_drift_max}};
}

// --- reports ---------------------------------------------------------------------------------

inline json report_json(const EstimateReport& r) {
  json p = json::object();
  for (const auto& [k, v] : r.parameters) p[k] = std::isfinite(v) ? json(v) : json(format_double(v));
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); };
  return {{"name", r.name},   {"lhs", num(r.lhs)},    {"rhs", num(r.rhs)},
          {"ratio", num(r.ratio)}, {"verdict", r.verdict()}, {"parameters", p},
          {"notes", r.notes}};
}

}  // namespace uhs::io
