#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wavefb/experiment.hpp"

namespace {

int parse_interval(const std::string& s, std::array<double, 2>& out) {
  const auto pos = s.find(':');
  if (pos == std::string::npos) return 1;
  try {
    out[0] = std::stod(s.substr(0, pos));
    out[1] = std::stod(s.substr(pos + 1));
  } catch (const std::exception&) {
    return 1;
  }
  return out[0] < out[1] ? 0 : 1;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave-equation boundary-feedback simulator and decay analyzer"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", run_dir, window_str, tau_str;
  double r_opt = -1.0;
  int jobs = 1;
  bool svg = false;

  auto* validate = app.add_subcommand("validate", "Check a configuration's assumptions");
  validate->add_option("--config", config_path, "Config JSON path")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a simulation");
  simulate->add_option("--config", config_path, "Config JSON path")->required();
  simulate->add_option("--out", out_dir, "Output run directory");

  auto* analyze = app.add_subcommand("analyze", "Post-process a run directory");
  analyze->add_option("--out", run_dir, "Run directory")->required();
  analyze->add_option("--r", r_opt, "Decay exponent parameter r (overrides config)");
  analyze->add_option("--window", window_str, "Fit window T0:T1");
  analyze->add_option("--tau", tau_str, "Multiplier interval T1:T2");
  analyze->add_flag("--svg", svg, "Write a log-log energy plot");

  auto* sweep = app.add_subcommand("sweep", "Run a batch of configurations");
  sweep->add_option("--config", config_path, "Sweep JSON path (base + overrides)")->required();
  sweep->add_option("--out", out_dir, "Sweep output directory");
  sweep->add_option("--jobs", jobs, "Parallel run limit")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) {
      const auto cfg = wavefb::config_from_json(load_json(config_path));
      const auto rep = wavefb::validate_config(cfg);
      for (const auto& m : rep.messages) std::printf("%s\n", m.c_str());
      std::printf("validate: %s\n", rep.passed ? "PASS" : "FAIL");
      return rep.passed ? 0 : 1;
    }
    if (simulate->parsed()) {
      const auto cfg = wavefb::config_from_json(load_json(config_path));
      const auto res = wavefb::run_simulation(cfg, out_dir);
      if (res.failed) {
        std::fprintf(stderr, "simulate: failed: %s\n", res.error.c_str());
        return 1;
      }
      std::printf("simulate: wrote %s (final energy %s)\n", out_dir.c_str(),
                  wavefb::format_full(res.final_energy).c_str());
      return 0;
    }
    if (analyze->parsed()) {
      wavefb::AnalysisOptions opts;
      if (r_opt > 0.0) opts.r = r_opt;
      std::array<double, 2> iv{};
      if (!window_str.empty()) {
        if (parse_interval(window_str, iv) != 0) {
          std::fprintf(stderr, "analyze: bad --window, expected T0:T1 with T0 < T1\n");
          return 2;
        }
        opts.window = iv;
      }
      if (!tau_str.empty()) {
        if (parse_interval(tau_str, iv) != 0) {
          std::fprintf(stderr, "analyze: bad --tau, expected T1:T2 with T1 < T2\n");
          return 2;
        }
        opts.tau = iv;
      }
      opts.svg = svg;
      return wavefb::run_analysis(run_dir, opts);
    }
    if (sweep->parsed()) {
      return wavefb::run_sweep(load_json(config_path), out_dir, jobs);
    }
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: config parse failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
