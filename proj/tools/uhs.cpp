// uhs: batch driver for rays, solves, estimate checks, symbol caches and reports.
//
// Exit codes: 0 success, 1 estimate violated, 2 configuration error, 3 internal failure.

#include "uhs/io/cache.hpp"
#include "uhs/io/manifest.hpp"
#include "uhs/io/plot.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <mutex>
#include <random>

namespace {

using namespace uhs;
using namespace uhs::io;

enum Exit { kOk = 0, kViolation = 1, kConfig = 2, kInternal = 3 };

/// Raised when verify or report needs runs that are not on disk.
struct MissingRuns : ConfigError {
  using ConfigError::ConfigError;
};

struct Context {
  ExperimentConfig cfg;
  std::string hash;
  fs::path out;
  CoefficientModel model;

  explicit Context(const std::string& path)
      : cfg(load_config(path)), hash(config_hash(cfg.source)), out(cfg.output), model(cfg.build_model()) {}

  bool selected(const std::string& name) const {
    const auto& s = cfg.diagnostics.select;
    return std::find(s.begin(), s.end(), name) != s.end();
  }

  fs::path run_json(const std::string& key) const { return out / "runs" / (key + ".json"); }
  fs::path run_csv(const std::string& key) const { return out / "runs" / (key + ".csv"); }
  fs::path snap_dir(const std::string& key) const { return out / "runs" / key; }

  /// Solver settings of one sweep entry.
  SolverConfig solver_for(const RunSpec& r) const {
    SolverConfig s = cfg.solver;
    s.epsilon = r.epsilon;
    s.grid = Grid(cfg.model.n, r.points, cfg.half_width);
    if (selected("smoothing")) s.record_every = smoothing_record_every(s, SmoothingCheckOptions{}.min_rows);
    if (selected("kstar")) s.store_snapshots = true;
    return s;
  }
};

RunTermination parse_termination(const std::string& s) {
  for (auto t : {RunTermination::completed, RunTermination::norm_blowup, RunTermination::step_failure,
                 RunTermination::range_exit})
    if (to_string(t) == s) return t;
  throw std::runtime_error("record: unknown termination '" + s + "'");
}

std::vector<RecordRow> rows_from_table(const Table& t, const SolverConfig& c) {
  std::vector<RecordRow> rows;
  for (const auto& v : t.rows) {
    RecordRow r;
    r.t = v[t.column("t")];
    r.l2 = v[t.column("l2")];
    std::size_t k = 2;
    for (std::size_t i = 0; i < c.sobolev_orders.size(); ++i) r.sobolev.push_back(v[k++]);
    for (std::size_t i = 0; i < c.weighted_pairs.size(); ++i) r.weighted.push_back(v[k++]);
    r.smoothing_density = v[t.column("smoothing_density")];
    r.smoothing_increment = v[t.column("smoothing_increment")];
    r.kstar = v[t.column("kstar")];
    r.er = v[t.column("er")];
    r.laplacian = v[t.column("laplacian")];
    rows.push_back(r);
  }
  return rows;
}

/// Reloads a persisted run; snapshots only on request.
RunRecord load_run(const Context& ctx, const RunSpec& r, bool snapshots) {
  RunRecord rec;
  rec.config = ctx.solver_for(r);
  const json j = json::parse(read_file(ctx.run_json(r.key)));
  rec.termination = parse_termination(j.at("termination"));
  rec.message = j.value("message", "");
  rec.end_time = j.at("end_time");
  rec.model_canonical = j.at("model");
  rec.rows = rows_from_table(parse_csv(read_file(ctx.run_csv(r.key))), rec.config);
  if (snapshots) {
    for (std::size_t i = 0; i < rec.rows.size(); ++i) {
      const fs::path p = ctx.snap_dir(r.key) / ("snap_" + std::to_string(i) + ".uhsf");
      if (!fs::exists(p)) throw MissingRuns("verify: run " + r.key + " has no snapshot " + p.filename().string() +
                                            "; set solver.store_snapshots or select kstar before `uhs solve`");
      rec.snapshots.push_back(read_snapshot(read_file(p)).first);
    }
  }
  return rec;
}

/// Runs of the sweep that have not been written yet.
std::vector<std::string> missing_runs(const Context& ctx, const std::vector<RunSpec>& runs) {
  RunManifest m(ctx.out, ctx.hash);
  std::vector<std::string> missing;
  for (const auto& r : runs)
    if (!m.completed(r.key) || !fs::exists(ctx.run_json(r.key)) || !fs::exists(ctx.run_csv(r.key)))
      missing.push_back(r.key);
  return missing;
}

void require_runs(const Context& ctx, const std::vector<RunSpec>& runs) {
  const auto missing = missing_runs(ctx, runs);
  if (missing.empty()) return;
  std::string msg = "missing runs (run `uhs solve` first):";
  for (const auto& k : missing) msg += " " + k;
  throw MissingRuns(msg);
}

std::string fmt(double v) { return format_double(v); }

// --- rays --------------------------------------------------------------------------------------

int cmd_rays(const std::string& path) {
  Context ctx(path);
  const auto& rs = ctx.cfg.rays;
  const double rho = rs.rho_escape > 0.0 ? rs.rho_escape : 1.5 * ctx.model.flat_radius();
  std::vector<PhasePoint> seeds;
  for (const auto& s : rs.seeds) seeds.emplace_back(VecN::Map(s.x.data(), ctx.cfg.model.n),
                                                    VecN::Map(s.xi.data(), ctx.cfg.model.n));
  const auto verdicts = classify_trapping(ctx.model, seeds, rs.s_max, rho, ctx.model.flat_radius(), rs.tol);
  RunManifest man(ctx.out, ctx.hash);
  json table = json::array();
  int escaped = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto tr = integrate_ray(ctx.model, seeds[i], rs.s_max, rho, rs.tol);
    const fs::path p = ctx.out / "rays" / ("trajectory_" + std::to_string(i) + ".csv");
    atomic_write(p, trajectory_csv(tr));
    man.add(p, "trajectory_csv");
    json v = verdict_json(verdicts[i]);
    v["seed"] = i;
    v["x"] = rs.seeds[i].x;
    v["xi"] = rs.seeds[i].xi;
    v["verdict"] = verdicts[i].escaped ? "escaped" : "undecided";
    table.push_back(v);
    escaped += verdicts[i].escaped;
  }
  const fs::path vp = ctx.out / "rays" / "verdicts.json";
  atomic_write(vp, json{{"config_hash", ctx.hash}, {"model", ctx.model.canonical()}, {"verdicts", table}}.dump(2));
  man.add(vp, "trapping_json");
  man.save();
  std::cout << "rays: " << seeds.size() << " seeds, " << escaped << " escaped, " << seeds.size() - escaped
            << " undecided\n";
  return kOk;
}

// --- solve -------------------------------------------------------------------------------------

int cmd_solve(const std::string& path, bool force, unsigned jobs) {
  Context ctx(path);
  const auto runs = expand_sweep(ctx.cfg);
  // Validate every entry before any compute.
  for (const auto& r : runs) ctx.solver_for(r).validate(ctx.model);
  if (ctx.cfg.quasilinear != ctx.model.quasilinear())
    throw ConfigError("solve: solver.quasilinear must match whether the model family is quasilinear");

  RunManifest man(ctx.out, ctx.hash);
  std::mutex mu;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (force || !man.completed(runs[i].key) || !fs::exists(ctx.run_json(runs[i].key))) todo.push_back(i);

  std::exception_ptr failure;
  parallel_for(
      todo.size(),
      [&](std::size_t k) {
        try {
          const RunSpec& r = runs[todo[k]];
          const SolverConfig s = ctx.solver_for(r);
          const ComplexField u0 = make_initial(ctx.cfg.initial, s.grid, r.amplitude);
          const RunRecord rec = ctx.cfg.quasilinear ? solve_quasilinear({&ctx.model, u0, {}}, s)
                                                    : solve_linear({&ctx.model, u0, {}}, s);
          const auto cont = continuation_monitor(rec, std::numeric_limits<double>::infinity());
          double drift = 0.0;
          for (const auto& row : rec.rows) drift = std::max(drift, std::abs(row.l2 - rec.rows.front().l2));
          const json extra = {
              {"config_hash", ctx.hash},
              {"epsilon", r.epsilon},
              {"amplitude", r.amplitude},
              {"initial_l2", rec.rows.front().l2},
              {"max_l2_drift", drift},
              {"continuation", to_string(cont.verdict)},
              {"doubling_time", cont.doubling_time ? json(*cont.doubling_time) : json(nullptr)},
              {"snapshots", rec.snapshots.size()}};
          std::vector<std::pair<fs::path, std::string>> files;
          for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
            const fs::path p = ctx.snap_dir(r.key) / ("snap_" + std::to_string(i) + ".uhsf");
            atomic_write(p, snapshot_bytes(rec.snapshots[i], rec.rows[i].t));
            files.emplace_back(p, "snapshot");
          }
          atomic_write(ctx.run_csv(r.key), record_csv(rec));
          files.emplace_back(ctx.run_csv(r.key), "record_csv");
          atomic_write(ctx.run_json(r.key), record_json(rec, r.key, extra).dump(2));
          files.emplace_back(ctx.run_json(r.key), "record_json");
          std::lock_guard lock(mu);
          for (const auto& [p, kind] : files) man.add(p, kind);
          man.mark_completed(r.key);
          man.save();
          std::cout << "solve: run " << r.key << " eps=" << r.epsilon << " amp=" << r.amplitude
                    << " M=" << r.points << " -> " << to_string(rec.termination) << "\n";
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      },
      std::max(1u, jobs));
  if (failure) std::rethrow_exception(failure);
  man.save();
  std::cout << "solve: " << runs.size() << " runs, " << todo.size() << " computed, " << runs.size() - todo.size()
            << " cached\n";
  return kOk;
}

// --- verify ------------------------------------------------------------------------------------

struct TableRow {
  std::string estimate;
  double epsilon, radius;
  int points;
  double lhs, rhs, ratio;
  std::string verdict;
};

int cmd_verify(const std::string& path) {
  Context ctx(path);
  const auto& d = ctx.cfg.diagnostics;
  const auto runs = expand_sweep(ctx.cfg);
  const bool needs_runs = ctx.selected("smoothing") || ctx.selected("kstar") || ctx.selected("continuation");
  if (needs_runs) require_runs(ctx, runs);

  RunManifest man(ctx.out, ctx.hash);
  std::vector<EstimateReport> reports;
  std::vector<TableRow> table;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto add = [&](const EstimateReport& r, double eps, double radius, int m) {
    table.push_back({r.name, eps, radius, m, r.lhs, r.rhs, r.ratio, r.verdict()});
  };

  if (ctx.selected("interpolation")) {
    const Grid g = ctx.cfg.grid();
    std::mt19937_64 rng(ctx.cfg.seed);
    std::normal_distribution<double> nd;
    std::vector<ComplexField> fields;
    for (int k = 0; k < d.interpolation_fields; ++k) {
      std::vector<Complex> v(g.size());
      for (auto& z : v) z = {nd(rng), nd(rng)};
      fields.emplace_back(g, std::move(v));
    }
    auto rep = interpolation_check(fields);
    reports.push_back(rep);
    add(rep, nan, nan, g.points());
  }

  if (ctx.selected("garding")) {
    GardingProbeOptions opt;
    opt.seed = ctx.cfg.seed;
    opt.samples = d.garding_samples;
    opt.scale = d.garding_scale;
    const auto p = escape_function_flat(ctx.model.signature(), ctx.cfg.solver.ntilde);
    auto rep = garding_commutator_probe(ctx.model, p, d.garding_t, ctx.cfg.grid(), opt);
    reports.push_back(rep);
    add(rep, nan, nan, ctx.cfg.points);
  }

  if (ctx.selected("ichinose")) {
    EstimateReport rep;
    rep.name = "ichinose";
    rep.lhs = ichinose_heuristic(ctx.model);
    rep.rhs = nan;
    rep.ratio = nan;
    rep.notes.push_back("informational: sup over sampled rays of |Im int b1(X).Xi ds|");
    reports.push_back(rep);
    add(rep, nan, nan, ctx.cfg.points);
  }

  std::vector<std::pair<RunSpec, RunRecord>> loaded;
  if (needs_runs)
    for (const auto& r : runs) loaded.emplace_back(r, load_run(ctx, r, false));

  LinePlot ratio_plot(PlotOptions{640, 400, true, false});
  if (ctx.selected("smoothing")) {
    if (ctx.cfg.quasilinear) throw ConfigError("verify: the smoothing estimate needs a linear model");
    SmoothingCheckOptions opt;
    opt.rhs = d.smoothing_rhs == "forcing_l1" ? SmoothingRhs::forcing_l1 : SmoothingRhs::forcing_weighted;
    // One verdict per (amplitude, M) group across the epsilon axis.
    std::map<std::pair<double, int>, std::vector<const std::pair<RunSpec, RunRecord>*>> groups;
    for (const auto& e : loaded) groups[{e.first.amplitude, e.first.points}].push_back(&e);
    for (const auto& [gk, members] : groups) {
      std::vector<SmoothingRun> sr;
      for (const auto* e : members) {
        const SolverConfig& s = e->second.config;
        const LinearProblem lp{&ctx.model, make_initial(ctx.cfg.initial, s.grid, e->first.amplitude), {}};
        sr.push_back(smoothing_run(e->second.rows, e->first.epsilon, forcing_rhs(lp, s, opt.rhs), e->second.termination));
      }
      auto check = smoothing_verdict(sr, members.front()->second.config, opt);
      check.report.parameters["amplitude"] = gk.first;
      reports.push_back(check.report);
      Series s;
      for (const auto& r : check.runs) {
        table.push_back({"local_smoothing", r.epsilon, nan, gk.second, r.lhs, r.rhs, r.ratio, check.report.verdict()});
        s.x.push_back(r.epsilon);
        s.y.push_back(r.ratio);
      }
      ratio_plot.add(std::move(s));
    }
  }

  if (ctx.selected("continuation")) {
    for (const auto& [r, rec] : loaded) {
      const auto c = continuation_monitor(rec, std::numeric_limits<double>::infinity());
      EstimateReport rep;
      rep.name = "continuation";
      rep.lhs = c.lambda_max;
      rep.rhs = nan;
      rep.ratio = nan;
      rep.parameters = {{"epsilon", r.epsilon}, {"amplitude", r.amplitude}, {"M", r.points}};
      if (c.exit_time) rep.parameters["exit_time"] = *c.exit_time;
      if (c.doubling_time) rep.parameters["doubling_time"] = *c.doubling_time;
      rep.notes.push_back(to_string(c.verdict));
      rep.bounded = c.verdict != ContinuationVerdict::blowup;
      reports.push_back(rep);
      add(rep, r.epsilon, nan, r.points);
    }
  }

  if (ctx.selected("kstar")) {
    const fs::path cdir = cache_dir(ctx.cfg.output);
    for (double radius : sweep_radii(ctx.cfg)) {
      std::map<int, std::shared_ptr<KOperators>> ops;
      for (const auto& [r, rec0] : loaded) {
        const Grid g = rec0.config.grid;
        if (!ops.count(r.points)) {
          const auto f = cached_integrating_factor(ctx.model, g, radius, {}, cdir, false);
          ops[r.points] = std::make_shared<KOperators>(f.factor, g, PlanOptions{}, ctx.cfg.seed);
        }
        const RunRecord rec = load_run(ctx, r, true);
        auto tr = kstar_energy_track(rec, ops[r.points].get());
        tr.report.parameters["epsilon"] = r.epsilon;
        tr.report.parameters["R"] = radius;
        reports.push_back(tr.report);
        add(tr.report, r.epsilon, radius, r.points);
      }
    }
  }

  // Persist.
  json all = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) all.push_back(report_json(reports[i]));
  const fs::path rj = ctx.out / "reports" / "estimates.json";
  atomic_write(rj, json{{"config_hash", ctx.hash}, {"reports", all}}.dump(2));
  man.add(rj, "report_json");
  std::ostringstream csv;
  csv << "estimate,epsilon,R,M,lhs,rhs,ratio,verdict\n";
  for (const auto& t : table)
    csv << t.estimate << "," << fmt(t.epsilon) << "," << fmt(t.radius) << "," << t.points << "," << fmt(t.lhs) << ","
        << fmt(t.rhs) << "," << fmt(t.ratio) << "," << t.verdict << "\n";
  const fs::path rc = ctx.out / "reports" / "estimates.csv";
  atomic_write(rc, csv.str());
  man.add(rc, "report_csv");
  if (!loaded.empty()) {
    LinePlot norms;
    for (const auto& [r, rec] : loaded) {
      Series s;
      for (const auto& row : rec.rows) s.x.push_back(row.t), s.y.push_back(row.l2);
      norms.add(std::move(s));
    }
    const fs::path p = ctx.out / "plots" / "norm_vs_time.png";
    atomic_write(p, norms.png());
    man.add(p, "plot");
  }
  if (ctx.selected("smoothing")) {
    const fs::path p = ctx.out / "plots" / "ratio_vs_eps.png";
    atomic_write(p, ratio_plot.png());
    man.add(p, "plot");
  }
  man.save();

  int violated = 0;
  for (const auto& r : reports) {
    std::cout << "verify: " << r.name << " " << r.verdict() << " ratio=" << r.ratio << "\n";
    violated += !r.bounded;
  }
  std::cout << "verify: " << reports.size() << " estimates, " << violated << " violated\n";
  return violated ? kViolation : kOk;
}

// --- cache ---------------------------------------------------------------------------------------

int cmd_cache_build(const std::string& path) {
  Context ctx(path);
  const fs::path dir = cache_dir(ctx.cfg.output);
  RunManifest man(ctx.out, ctx.hash);
  std::set<int> points;
  for (const auto& r : expand_sweep(ctx.cfg)) points.insert(r.points);
  for (int m : points)
    for (double radius : sweep_radii(ctx.cfg)) {
      const Grid g(ctx.cfg.model.n, m, ctx.cfg.half_width);
      const auto f = cached_integrating_factor(ctx.model, g, radius, {}, dir, true);
      if (f.path.empty()) {
        std::cout << "cache: M=" << m << " R=" << radius << " constant symbols, nothing stored\n";
        continue;
      }
      // Files under UHS_CACHE_DIR may be shared between configs; only local ones are listed.
      const auto rel = fs::relative(f.path, ctx.out);
      if (!rel.empty() && rel.begin()->string() != "..") man.add(f.path, "symbol_cache");
      std::cout << "cache: M=" << m << " R=" << radius << " " << (f.built ? "built " : "present ")
                << f.path.string() << "\n";
    }
  man.save();
  return kOk;
}

// --- report --------------------------------------------------------------------------------------

int cmd_report(const std::string& path, const std::string& dir) {
  Context ctx(path);
  const auto runs = expand_sweep(ctx.cfg);
  require_runs(ctx, runs);
  const fs::path out(dir);
  RunManifest man(out, ctx.hash);
  json jr = json::array();
  std::ostringstream csv;
  csv << "run_key,epsilon,amplitude,M,termination,end_time,initial_l2,final_l2\n";
  LinePlot norms;
  for (const auto& r : runs) {
    const json j = json::parse(read_file(ctx.run_json(r.key)));
    const RunRecord rec = load_run(ctx, r, false);
    jr.push_back({{"run_key", r.key},
                  {"epsilon", r.epsilon},
                  {"amplitude", r.amplitude},
                  {"M", r.points},
                  {"termination", j.at("termination")},
                  {"end_time", j.at("end_time")},
                  {"final_l2", j.at("final_l2")},
                  {"continuation", j.value("continuation", "")}});
    csv << r.key << "," << fmt(r.epsilon) << "," << fmt(r.amplitude) << "," << r.points << ","
        << j.at("termination").get<std::string>() << "," << fmt(rec.end_time) << "," << fmt(rec.rows.front().l2)
        << "," << fmt(rec.rows.back().l2) << "\n";
    Series s;
    for (const auto& row : rec.rows) s.x.push_back(row.t), s.y.push_back(row.l2);
    norms.add(std::move(s));
  }
  json estimates = nullptr;
  if (const fs::path e = ctx.out / "reports" / "estimates.json"; fs::exists(e))
    estimates = json::parse(read_file(e)).at("reports");
  const json doc = {{"config_hash", ctx.hash}, {"tool_version", kToolVersion}, {"generated", utc_timestamp()},
                    {"model", ctx.model.canonical()}, {"runs", jr}, {"estimates", estimates}};
  atomic_write(out / "report.json", doc.dump(2));
  man.add(out / "report.json", "report_json");
  atomic_write(out / "runs.csv", csv.str());
  man.add(out / "runs.csv", "report_csv");
  atomic_write(out / "norm_vs_time.png", norms.png());
  man.add(out / "norm_vs_time.png", "plot");
  man.save();
  std::cout << "report: " << runs.size() << " runs written to " << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uhs: ultrahyperbolic Schroedinger experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string config, out_dir;
  bool force = false;
  unsigned jobs = 1;

  auto* rays = app.add_subcommand("rays", "integrate ray seeds and classify trapping");
  rays->add_option("-c,--config", config, "experiment config (JSON)")->required();
  auto* solve = app.add_subcommand("solve", "run the solver sweep");
  solve->add_option("-c,--config", config, "experiment config (JSON)")->required();
  solve->add_flag("--force", force, "recompute completed runs");
  solve->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* verify = app.add_subcommand("verify", "evaluate the selected estimates");
  verify->add_option("-c,--config", config, "experiment config (JSON)")->required();
  auto* cache = app.add_subcommand("cache", "symbol table cache");
  cache->require_subcommand(1);
  auto* build = cache->add_subcommand("build", "build the integrating-factor tables");
  build->add_option("-c,--config", config, "experiment config (JSON)")->required();
  auto* report = app.add_subcommand("report", "collect runs and estimates into a directory");
  report->add_option("-c,--config", config, "experiment config (JSON)")->required();
  report->add_option("-o,--out", out_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*rays) return cmd_rays(config);
    if (*solve) return cmd_solve(config, force, jobs);
    if (*verify) return cmd_verify(config);
    if (*build) return cmd_cache_build(config);
    if (*report) return cmd_report(config, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "uhs: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "uhs: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "uhs: internal failure: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
