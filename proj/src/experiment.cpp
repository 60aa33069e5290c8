#include "wavefb/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <stdexcept>

namespace wavefb {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string config_hash(const json& config) {
  const std::string s = config.dump();  // objects serialize key-sorted
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;

  const json& m = j.at("mesh");
  cfg.mesh_type = m.at("type").get<std::string>();
  if (cfg.mesh_type == "unit_square") {
    cfg.square_n = m.at("n").get<int>();
  } else if (cfg.mesh_type == "annulus") {
    cfg.r_inner = m.at("r_inner").get<double>();
    cfg.r_outer = m.at("r_outer").get<double>();
    cfg.resolution = m.at("resolution").get<double>();
  } else {
    throw std::invalid_argument("config: unknown mesh type '" + cfg.mesh_type + "'");
  }

  cfg.partition = j.value("partition", std::string("mesh_default"));
  if (cfg.partition != "mesh_default" && cfg.partition != "gamma0_all" &&
      cfg.partition != "gamma1_all")
    throw std::invalid_argument("config: unknown partition rule '" + cfg.partition + "'");

  if (j.contains("x0")) {
    cfg.x0 = {j["x0"].at(0).get<double>(), j["x0"].at(1).get<double>()};
  }
  cfg.nonlinearity = j.value("nonlinearity", json{{"type", "saturation"}, {"S", 1.0}});
  cfg.initial_data = j.value("initial_data", json{{"type", "zero"}});
  if (j.contains("normalize_energy"))
    cfg.normalize_energy = j["normalize_energy"].get<double>();

  cfg.dt = j.at("dt").get<double>();
  cfg.t_end = j.at("t_end").get<double>();
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
  if (!(cfg.t_end > cfg.dt)) throw std::invalid_argument("config: t_end must exceed dt");

  cfg.solver.lambda = 1.0 / cfg.dt;
  if (j.contains("solver")) {
    const json& s = j["solver"];
    cfg.solver.tol = s.value("tol", cfg.solver.tol);
    cfg.solver.max_iter = s.value("max_iter", cfg.solver.max_iter);
    cfg.solver.relaxation = s.value("relaxation", cfg.solver.relaxation);
    cfg.solver.acceleration = s.value("acceleration", cfg.solver.acceleration);
  }
  cfg.solver.validate();

  cfg.snapshot_every = j.value("snapshot_every", 5);
  if (cfg.snapshot_every < 1)
    throw std::invalid_argument("config: snapshot_every must be >= 1");
  cfg.r = j.value("r", 2.0);
  cfg.scheme = j.value("scheme", std::string("implicit_euler"));
  if (cfg.scheme != "implicit_euler" && cfg.scheme != "midpoint")
    throw std::invalid_argument("config: unknown scheme '" + cfg.scheme + "'");

  const std::string preset = cfg.initial_data.at("type").get<std::string>();
  if (preset != "zero" && preset != "eigenfunction" && preset != "annulus_mode" &&
      preset != "radial_bump" && preset != "random_strong")
    throw std::invalid_argument("config: unknown initial data preset '" + preset + "'");
  return cfg;
}

Mesh build_mesh(const ExperimentConfig& cfg) {
  Mesh mesh = cfg.mesh_type == "unit_square"
                  ? build_unit_square_mesh(cfg.square_n)
                  : build_annulus_mesh(cfg.r_inner, cfg.r_outer, cfg.resolution);
  if (cfg.partition == "gamma0_all") set_uniform_boundary_label(mesh, BoundaryLabel::Gamma0);
  if (cfg.partition == "gamma1_all") set_uniform_boundary_label(mesh, BoundaryLabel::Gamma1);
  return mesh;
}

State build_initial_data(const ExperimentConfig& cfg, const DiscreteOperators& ops,
                         const BoundaryFeedback& fb) {
  const json& id = cfg.initial_data;
  const std::string type = id.at("type").get<std::string>();
  const int n = ops.node_count();
  State s{ops.zero_volume_field(), ops.zero_volume_field()};

  if (type == "eigenfunction") {
    const int m = id.value("m", 1), k = id.value("n", 1);
    const double amp = id.value("amplitude", 1.0);
    for (int i = 0; i < n; ++i) {
      const auto& x = ops.mesh().nodes[i];
      s.u.values[i] = amp * std::sin(m * M_PI * x[0]) * std::sin(k * M_PI * x[1]);
    }
  } else if (type == "annulus_mode") {
    const int k = id.value("k", 1);
    const double amp = id.value("amplitude", 1.0);
    for (int i = 0; i < n; ++i) {
      const auto& x = ops.mesh().nodes[i];
      const double rho = std::hypot(x[0], x[1]);
      const double xi = (rho - cfg.r_inner) / (cfg.r_outer - cfg.r_inner);
      s.u.values[i] = amp * std::sin(k * M_PI * std::clamp(xi, 0.0, 1.0));
    }
  } else if (type == "radial_bump") {
    const double c = id.value("center", 0.5 * (cfg.r_inner + cfg.r_outer));
    const double w = id.value("width", 0.25 * (cfg.r_outer - cfg.r_inner));
    const double amp = id.value("amplitude", 1.0);
    for (int i = 0; i < n; ++i) {
      const auto& x = ops.mesh().nodes[i];
      const double rho = cfg.mesh_type == "annulus" ? std::hypot(x[0], x[1])
                                                    : std::hypot(x[0] - 0.5, x[1] - 0.5);
      const double arg = (rho - c) / w;
      s.u.values[i] = amp * std::exp(-arg * arg);
    }
    ops.zero_trace(s.u);
  } else if (type == "random_strong") {
    const unsigned seed = id.value("seed", 0u);
    const double amp = id.value("amplitude", 1.0);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VolumeField w = ops.zero_volume_field(), z = ops.zero_volume_field();
    for (int i = 0; i < n; ++i) w.values[i] = amp * dist(rng);
    for (int i = 0; i < n; ++i) z.values[i] = amp * dist(rng);
    s = make_strong_data(ops, fb, w, z);
  }
  // "zero" leaves the zero state

  if (cfg.normalize_energy) {
    const double e = energy(ops, s);
    if (e > 0.0) {
      const double scale = std::sqrt(*cfg.normalize_energy / e);
      s.u.values *= scale;
      s.v.values *= scale;
      if (type == "random_strong") s = make_strong_data(ops, fb, s.u, s.v);
    }
  }
  return s;
}

ValidationReport validate_config(const ExperimentConfig& cfg) {
  ValidationReport rep;
  const Mesh mesh = build_mesh(cfg);
  mesh.validate();

  const GeometryReport geo = check_geometric_assumptions(mesh, cfg.x0);
  if (!geo.partition_condition_satisfied) {
    rep.passed = false;
    rep.messages.push_back(
        "geometry: partition condition violated (boundary-part separation " +
        format_full(geo.min_separation) + ", max h.nu on the unactuated part " +
        format_full(geo.max_h_dot_nu_on_gamma1) + ")");
  } else {
    rep.messages.push_back("geometry: partition condition satisfied");
  }

  const Nonlinearity nl = nonlinearity_from_json(cfg.nonlinearity);
  std::vector<double> grid;
  for (int k = -50; k <= 50; ++k) grid.push_back(0.1 * k);
  const NonlinearityValidation nv = validate_assumptions(nl, grid);
  if (!nv.passed) {
    rep.passed = false;
    for (const auto& v : nv.violations) rep.messages.push_back("feedback map: " + v);
  } else {
    rep.messages.push_back("feedback map: declared properties hold on the sample grid");
  }
  return rep;
}

namespace {

json state_to_json(double t, const State& s) {
  json j;
  j["t"] = t;
  j["u"] = std::vector<double>(s.u.values.data(), s.u.values.data() + s.u.values.size());
  j["v"] = std::vector<double>(s.v.values.data(), s.v.values.data() + s.v.values.size());
  return j;
}

State state_from_json(const json& j) {
  State s;
  const auto u = j.at("u").get<std::vector<double>>();
  const auto v = j.at("v").get<std::vector<double>>();
  s.u.values = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
  s.v.values = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  return s;
}

void write_trace_csv(const fs::path& path, const std::vector<StepRecord>& records) {
  std::ofstream out(path);
  out << "t,energy,dissipation,kato_norm,resolvent_iters,resolvent_residual\n";
  for (const auto& r : records)
    out << format_full(r.t) << ',' << format_full(r.energy) << ','
        << format_full(r.dissipation) << ',' << format_full(r.kato_norm) << ','
        << r.resolvent_iterations << ',' << format_full(r.resolvent_residual) << '\n';
}

std::vector<StepRecord> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing trace file: " + path.string());
  std::vector<StepRecord> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepRecord r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    ss >> r.t >> r.energy >> r.dissipation >> r.kato_norm >> r.resolvent_iterations >>
        r.resolvent_residual;
    out.push_back(r);
  }
  return out;
}

}  // namespace

void write_checkpoint(const fs::path& path, double t, const State& s,
                      const std::string& hash) {
  json j = state_to_json(t, s);
  j["config_hash"] = hash;
  std::ofstream(path) << j.dump(2) << '\n';
}

std::pair<double, State> read_checkpoint(const fs::path& path,
                                         const std::string& expected_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing checkpoint: " + path.string());
  json j;
  in >> j;
  if (!expected_hash.empty() && j.at("config_hash").get<std::string>() != expected_hash)
    throw std::runtime_error("checkpoint config hash mismatch");
  return {j.at("t").get<double>(), state_from_json(j)};
}

RunResult run_simulation(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir / "snapshots");

  const Mesh mesh = build_mesh(cfg);
  const DiscreteOperators ops(mesh);
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, nonlinearity_from_json(cfg.nonlinearity));

  RunResult result;
  result.trace.meta.r = cfg.r;
  result.trace.meta.x0 = cfg.x0;
  result.trace.meta.nonlinearity = cfg.nonlinearity.dump();

  State state = build_initial_data(cfg, ops, fb);
  const int n_steps = std::max(1, static_cast<int>(std::llround(cfg.t_end / cfg.dt)));

  auto record_at = [&](double t, const State& s, int iters, double res) {
    StepRecord rec;
    rec.t = t;
    rec.energy = energy(ops, s);
    rec.dissipation = dissipation(ops, fb, s.v);
    try {
      rec.kato_norm = apply_generator(ops, fb, s).second;
    } catch (const std::invalid_argument&) {
      rec.kato_norm = 0.0;  // not strong data; the column stays informative elsewhere
    }
    rec.resolvent_iterations = iters;
    rec.resolvent_residual = res;
    return rec;
  };

  auto snapshot = [&](int step, double t, const State& s) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap_%06d.json", step);
    std::ofstream(out_dir / "snapshots" / name) << state_to_json(t, s).dump() << '\n';
    result.trace.snapshots.push_back({t, s.u, s.v});
  };

  result.trace.records.push_back(record_at(0.0, state, 0, 0.0));
  snapshot(0, 0.0, state);

  int completed = 0;
  try {
    if (cfg.scheme == "midpoint") {
      LinearMidpointStepper mid(ops, cfg.dt);
      for (int k = 1; k <= n_steps; ++k) {
        state = mid.step(state);
        const double t = k * cfg.dt;
        result.trace.records.push_back(record_at(t, state, 0, 0.0));
        if (k % cfg.snapshot_every == 0 || k == n_steps) snapshot(k, t, state);
        completed = k;
      }
    } else {
      ResolventSolver solver(ops, fb, cfg.solver);
      for (int k = 1; k <= n_steps; ++k) {
        auto [next, rec] = step(solver, state, k * cfg.dt);
        state = std::move(next);
        result.trace.records.push_back(rec);
        if (k % cfg.snapshot_every == 0 || k == n_steps) snapshot(k, rec.t, state);
        completed = k;
      }
    }
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
  }

  result.final_energy = result.trace.records.back().energy;
  write_trace_csv(out_dir / "trace.csv", result.trace.records);
  const std::string hash = config_hash(cfg.raw);
  write_checkpoint(out_dir / "checkpoint.json", result.trace.records.back().t, state, hash);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  json manifest;
  manifest["config"] = cfg.raw;
  manifest["config_hash"] = hash;
  manifest["artifact_version"] = "1.0";
  manifest["wall_clock_seconds"] = wall;
  manifest["steps_completed"] = completed;
  manifest["files"] = {"trace.csv", "checkpoint.json", "snapshots/"};
  manifest["summary"] = {{"initial_energy", result.trace.records.front().energy},
                         {"final_energy", result.final_energy},
                         {"failed", result.failed},
                         {"error", result.error}};
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

std::pair<ExperimentConfig, Trace> load_run(const fs::path& run_dir) {
  std::ifstream min(run_dir / "manifest.json");
  if (!min) throw std::runtime_error("missing manifest: " + (run_dir / "manifest.json").string());
  json manifest;
  min >> manifest;
  ExperimentConfig cfg = config_from_json(manifest.at("config"));

  Trace trace;
  trace.meta.r = cfg.r;
  trace.meta.x0 = cfg.x0;
  trace.meta.nonlinearity = cfg.nonlinearity.dump();
  trace.records = read_trace_csv(run_dir / "trace.csv");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(run_dir / "snapshots"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    in >> j;
    State s = state_from_json(j);
    trace.snapshots.push_back({j.at("t").get<double>(), std::move(s.u), std::move(s.v)});
  }
  return {std::move(cfg), std::move(trace)};
}

void write_energy_svg(const fs::path& path, const std::vector<double>& times,
                      const std::vector<double>& energies) {
  const int W = 640, H = 440, margin = 50;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] > 0.0 && energies[k] > 0.0)
      pts.emplace_back(std::log10(times[k]), std::log10(energies[k]));
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (pts.size() >= 2) {
    double xmin = pts[0].first, xmax = xmin, ymin = pts[0].second, ymax = ymin;
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.first);
      xmax = std::max(xmax, p.first);
      ymin = std::min(ymin, p.second);
      ymax = std::max(ymax, p.second);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : pts) {
      const double px = margin + (p.first - xmin) / (xmax - xmin) * (W - 2 * margin);
      const double py = H - margin - (p.second - ymin) / (ymax - ymin) * (H - 2 * margin);
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n";
  }
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">log10 t</text>\n"
      << "<text x=\"14\" y=\"" << H / 2
      << "\" font-size=\"13\" transform=\"rotate(-90 14 " << H / 2
      << ")\" text-anchor=\"middle\">log10 E</text>\n</svg>\n";
}

int run_analysis(const fs::path& run_dir, const AnalysisOptions& opts) {
  ExperimentConfig cfg;
  Trace trace;
  try {
    std::tie(cfg, trace) = load_run(run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "analyze: %s\n", e.what());
    return 1;
  }
  if (trace.records.empty()) {
    std::fprintf(stderr, "analyze: empty trace in %s\n", run_dir.string().c_str());
    return 1;
  }

  const double r = opts.r.value_or(cfg.r);
  std::vector<double> times, energies;
  for (const auto& rec : trace.records) {
    times.push_back(rec.t);
    energies.push_back(rec.energy);
  }

  json report;
  report["r"] = r;

  // power-law fit of E(t)
  const std::array<double, 2> window =
      opts.window.value_or(std::array<double, 2>{0.2 * times.back(), times.back()});
  bool no_decay = false;
  try {
    const DecayFit fit = fit_decay(times, energies, window);
    report["fit"] = {{"alpha", fit.alpha},
                     {"c", fit.c},
                     {"window", fit.window},
                     {"residual", fit.residual}};
    if (fit.alpha < 0.01) no_decay = true;
  } catch (const std::exception& e) {
    report["fit"] = {{"error", e.what()}};
    no_decay = energies.back() > 0.5 * energies.front();
  }
  report["no_decay"] = no_decay;

  // integral-inequality check with gamma = (r-1)/2
  try {
    const KomornikResult kom = komornik_check(times, energies, 0.5 * (r - 1.0));
    report["komornik"] = {{"T_estimate", kom.T_estimate},
                         {"conclusion_holds", kom.conclusion_holds},
                         {"unbounded", kom.unbounded},
                         {"tail_model", kom.tail_model}};
  } catch (const std::exception& e) {
    report["komornik"] = {{"error", e.what()}};
  }

  // multiplier identity residual over the requested interval
  try {
    if (trace.snapshots.size() < 2) throw std::invalid_argument("fewer than two snapshots");
    const Mesh mesh = build_mesh(cfg);
    const DiscreteOperators ops(mesh);
    const BoundaryFeedback fb =
        BoundaryFeedback::make(ops, nonlinearity_from_json(cfg.nonlinearity));
    const double tau1 = opts.tau ? (*opts.tau)[0] : trace.snapshots.front().t;
    const double tau2 = opts.tau ? (*opts.tau)[1] : trace.snapshots.back().t;
    report["multiplier_residual"] =
        multiplier_identity_residual(ops, fb, trace.snapshots, tau1, tau2, r, cfg.x0);
    report["tau"] = {tau1, tau2};
  } catch (const std::exception& e) {
    report["multiplier_residual"] = nullptr;
    report["multiplier_error"] = e.what();
  }

  // boundedness monitor of t^{2/(r-1)} E(t)
  try {
    const double t0 = 0.0999 * times.back();
    const BoundMonitorResult mon = polynomial_bound_monitor(times, energies, r, t0);
    report["bound_monitor"] = {{"max", mon.max_value},
                              {"quarter_ratio", mon.quarter_ratio},
                              {"t0", t0}};
    std::ofstream csv(run_dir / "bound_monitor.csv");
    csv << "t,weighted_energy\n";
    for (std::size_t k = 0; k < mon.times.size(); ++k)
      csv << format_full(mon.times[k]) << ',' << format_full(mon.values[k]) << '\n';
  } catch (const std::exception& e) {
    report["bound_monitor"] = {{"error", e.what()}};
  }

  if (opts.svg) write_energy_svg(run_dir / "energy.svg", times, energies);
  std::ofstream(run_dir / "analysis.json") << report.dump(2) << '\n';
  return 0;
}

int run_sweep(const json& sweep, const fs::path& out_dir, int jobs) {
  const json base = sweep.at("base");
  std::vector<json> configs;
  if (sweep.contains("overrides") && !sweep["overrides"].empty()) {
    for (const auto& patch : sweep["overrides"]) {
      json merged = base;
      merged.merge_patch(patch);
      configs.push_back(std::move(merged));
    }
  } else {
    configs.push_back(base);
  }
  jobs = std::max(1, jobs);
  fs::create_directories(out_dir);

  struct Row {
    std::string dir, hash;
    bool failed = true;
    double final_energy = 0.0, alpha = std::numeric_limits<double>::quiet_NaN();
    std::string error;
  };
  std::vector<Row> rows(configs.size());

  auto run_one = [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%04zu", i);
    Row row;
    row.dir = name;
    try {
      const ExperimentConfig cfg = config_from_json(configs[i]);
      row.hash = config_hash(cfg.raw);
      const RunResult res = run_simulation(cfg, out_dir / name);
      row.failed = res.failed;
      row.error = res.error;
      row.final_energy = res.final_energy;
      std::vector<double> times, energies;
      for (const auto& rec : res.trace.records) {
        times.push_back(rec.t);
        energies.push_back(rec.energy);
      }
      try {
        row.alpha = fit_decay(times, energies, {0.2 * times.back(), times.back()}).alpha;
      } catch (const std::exception&) {
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows[i] = std::move(row);
  };

  for (std::size_t next = 0; next < configs.size();) {
    std::vector<std::future<void>> batch;
    for (int j = 0; j < jobs && next < configs.size(); ++j, ++next)
      batch.push_back(std::async(std::launch::async, run_one, next));
    for (auto& f : batch) f.get();
  }

  std::ofstream csv(out_dir / "summary.csv");
  csv << "run,config_hash,failed,final_energy,alpha,error\n";
  bool any_failed = false;
  for (const auto& row : rows) {
    any_failed = any_failed || row.failed;
    csv << row.dir << ',' << row.hash << ',' << (row.failed ? 1 : 0) << ','
        << format_full(row.final_energy) << ',' << format_full(row.alpha) << ",\""
        << row.error << "\"\n";
  }
  return any_failed ? 1 : 0;
}

}  // namespace wavefb
