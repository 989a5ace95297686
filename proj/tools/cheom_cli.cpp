#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cheom/config.hpp"
#include "cheom/experiments.hpp"
#include "cheom/hierarchy.hpp"
#include "cheom/io.hpp"

using namespace cheom;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> trajectories;
  std::optional<double> dt;
  std::vector<int> kmax;
  unsigned threads = 0;
};

ScenarioConfig load(const Overrides& o, json& echo, bool single_kmax) {
  ScenarioConfig cfg = parse_config_file(o.config);
  if (o.seed) {
    cfg.master_seed = *o.seed;
    echo["seed"] = *o.seed;
  }
  if (o.trajectories) {
    if (*o.trajectories < 1) throw ConfigError("--trajectories", "must be >= 1");
    cfg.trajectories = static_cast<std::size_t>(*o.trajectories);
    echo["trajectories"] = *o.trajectories;
  }
  if (o.dt) {
    cfg.dt = *o.dt;
    echo["dt"] = *o.dt;
  }
  if (single_kmax && !o.kmax.empty()) {
    if (o.kmax.size() != 1) throw ConfigError("--kmax", "this subcommand takes a single value");
    cfg.k_max = o.kmax[0];
    echo["k_max"] = o.kmax[0];
  }
  if (o.threads) echo["threads"] = o.threads;
  validate(cfg);
  return cfg;
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void finish(const std::string& dir, const std::string& sub, const ScenarioConfig& cfg, const json& echo,
            std::chrono::steady_clock::time_point t0, const std::vector<std::string>& files, json extra = json::object()) {
  ManifestExtras ex;
  ex.subcommand = sub;
  ex.overrides = echo;
  ex.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ex.files = files;
  json m = make_manifest(cfg, ex);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text_atomic(path_in(dir, "manifest.json"), m.dump(2) + "\n");
}

int cmd_run(const Overrides& o, std::size_t index) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  const ScenarioConfig cfg = load(o, echo, true);
  echo["trajectory_index"] = index;
  const Scenario sc = make_scenario(cfg);
  const RunRecord rec = run_trajectory(sc, index);
  std::vector<std::string> files;

  std::vector<std::string> head{"t"};
  std::vector<std::vector<double>> cols{rec.t};
  head.insert(head.end(), rec.columns.begin(), rec.columns.end());
  cols.insert(cols.end(), rec.series.begin(), rec.series.end());
  write_text_atomic(path_in(o.out, "series.csv"), csv_table(head, cols));
  files.push_back("series.csv");

  std::vector<std::string> ch{"t"};
  std::vector<std::vector<double>> cc(1);
  const std::size_t n = cfg.steps();
  for (std::size_t s = 0; s < n; ++s) cc[0].push_back(static_cast<double>(s) * cfg.dt);
  for (std::size_t k = 0; k < rec.currents.size(); ++k) {
    if (rec.currents[k].empty()) continue;
    const bool het = cfg.modes[k].detection == Detection::heterodyne;
    ch.push_back(het ? "J." + std::to_string(k) + ".re" : "J." + std::to_string(k));
    cc.emplace_back();
    for (const auto& v : rec.currents[k]) cc.back().push_back(v.real());
    if (het) {
      ch.push_back("J." + std::to_string(k) + ".im");
      cc.emplace_back();
      for (const auto& v : rec.currents[k]) cc.back().push_back(v.imag());
    }
  }
  if (cc.size() > 1) {
    write_text_atomic(path_in(o.out, "currents.csv"), csv_table(ch, cc));
    files.push_back("currents.csv");
  }
  bool any_jump_mode = false;
  std::vector<double> jm, jt;
  for (std::size_t k = 0; k < rec.jump_times.size(); ++k) {
    if (cfg.modes[k].detection == Detection::photodetect) any_jump_mode = true;
    for (double t : rec.jump_times[k]) {
      jm.push_back(static_cast<double>(k));
      jt.push_back(t);
    }
  }
  if (any_jump_mode) {
    write_text_atomic(path_in(o.out, "jumps.csv"), csv_table({"mode", "t"}, {jm, jt}));
    files.push_back("jumps.csv");
  }
  finish(o.out, "run", cfg, echo, t0, files);
  return 0;
}

int cmd_ensemble(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  const ScenarioConfig cfg = load(o, echo, true);
  const Scenario sc = make_scenario(cfg);
  const EnsembleResult r = run_ensemble(sc, cfg.trajectories, o.threads);
  std::vector<std::string> head{"t"};
  std::vector<std::vector<double>> cols{r.t};
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    head.push_back(r.columns[c]);
    cols.push_back(r.mean[c]);
    head.push_back(r.columns[c] + ".se");
    cols.push_back(r.se[c]);
  }
  write_text_atomic(path_in(o.out, "ensemble.csv"), csv_table(head, cols));
  std::vector<std::string> sh{"t"};
  std::vector<std::vector<double>> sc_cols{r.t};
  sh.insert(sh.end(), r.state_columns.begin(), r.state_columns.end());
  sc_cols.insert(sc_cols.end(), r.state_series.begin(), r.state_series.end());
  write_text_atomic(path_in(o.out, "mean_state.csv"), csv_table(sh, sc_cols));
  finish(o.out, "ensemble", cfg, echo, t0, {"ensemble.csv", "mean_state.csv"});
  return 0;
}

int cmd_scan(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  const ScenarioConfig cfg = load(o, echo, false);
  const ScanConfig scan = cfg.scan ? *cfg.scan : ScanConfig{};
  std::vector<int> kmaxes = o.kmax.empty() ? std::vector<int>{cfg.k_max} : o.kmax;
  if (!o.kmax.empty()) echo["k_max"] = o.kmax;
  const Scenario sc = make_scenario(cfg);
  const auto grid = lambda_grid(scan.lambda_min, scan.lambda_max, scan.lambda_step);
  std::vector<std::string> head{"lambda"};
  std::vector<std::vector<double>> cols{grid};
  std::vector<double> mk, ml, mx, mt;
  for (int k : kmaxes) {
    const auto pts = lambda_scan(sc, grid, k, o.threads);
    std::vector<double> v, t;
    for (const auto& p : pts) {
      v.push_back(p.min_xi2);
      t.push_back(p.t_min);
    }
    head.push_back("min_xi2.k" + std::to_string(k));
    cols.push_back(v);
    head.push_back("t_min.k" + std::to_string(k));
    cols.push_back(t);
    for (const auto& m : scan_minima(pts)) {
      mk.push_back(k);
      ml.push_back(m.lambda);
      mx.push_back(m.min_xi2);
      mt.push_back(m.t_min);
    }
  }
  write_text_atomic(path_in(o.out, "scan.csv"), csv_table(head, cols));
  write_text_atomic(path_in(o.out, "minima.csv"), csv_table({"k_max", "lambda", "min_xi2", "t_min"}, {mk, ml, mx, mt}));
  for (std::size_t i = 0; i < ml.size(); ++i)
    std::printf("k_max=%d local minimum lambda=%.4f min_xi2=%.6f t=%.3f\n", static_cast<int>(mk[i]), ml[i], mx[i], mt[i]);
  finish(o.out, "scan-lambda", cfg, echo, t0, {"scan.csv", "minima.csv"});
  return 0;
}

int cmd_switch(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  const ScenarioConfig cfg = load(o, echo, true);
  if (!cfg.switching) throw ConfigError("switching", "missing required section for switch-protocol");
  const auto& w = *cfg.switching;
  const Scenario sc = make_scenario(cfg);
  const auto sw = switching_protocol(sc, w.lambda_plus, w.lambda_minus, w.t1, w.t2);
  const auto plus = switching_protocol(sc, w.lambda_plus, w.lambda_plus, w.t1, w.t2);
  const auto minus = switching_protocol(sc, w.lambda_minus, w.lambda_minus, w.t1, w.t2);
  write_text_atomic(path_in(o.out, "switching.csv"),
                    csv_table({"t", "lambda", "xi2.switching", "xi2.plus", "xi2.minus"},
                              {sw.t, sw.lambda, sw.xi2, plus.xi2, minus.xi2}));
  finish(o.out, "switch-protocol", cfg, echo, t0, {"switching.csv"});
  return 0;
}

int cmd_compare(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  const ScenarioConfig cfg = load(o, echo, false);
  std::vector<int> kmaxes = o.kmax.empty() ? std::vector<int>{cfg.k_max} : o.kmax;
  if (!o.kmax.empty()) echo["k_max"] = o.kmax;
  const Scenario sc = make_scenario(cfg);
  CompareOptions opt;
  opt.threads = o.threads;
  const CompareReport rep = oracle_compare(sc, cfg.trajectories, kmaxes, opt);
  std::vector<std::string> head{"t"};
  std::vector<std::vector<double>> cols{rep.t};
  for (std::size_t q = 0; q < rep.methods.size(); ++q) {
    head.push_back(rep.methods[q]);
    cols.push_back(rep.mean[q]);
    head.push_back(rep.methods[q] + ".se");
    cols.push_back(rep.se[q]);
  }
  write_text_atomic(path_in(o.out, "compare.csv"), csv_table(head, cols));
  json summary = json::array();
  for (std::size_t q = 0; q < rep.methods.size(); ++q) {
    summary.push_back({{"method", rep.methods[q]}, {"time_average", rep.time_average[q]}, {"max", rep.max_distance[q]}});
    std::printf("%-12s time-averaged distance %.6e  max %.6e\n", rep.methods[q].c_str(), rep.time_average[q],
                rep.max_distance[q]);
  }
  finish(o.out, "compare-oracle", cfg, echo, t0, {"compare.csv"},
         {{"summary", summary}, {"max_oracle_leakage", rep.max_oracle_leakage}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditioned hierarchical equations of motion for monitored cavity QED"};
  app.require_subcommand(1);
  Overrides o;
  std::size_t index = 0;
  int modes = 0, kmax_count = 0;

  auto common = [&](CLI::App* s, bool trajectories) {
    s->add_option("--config", o.config, "scenario JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--seed", o.seed, "master seed override");
    s->add_option("--dt", o.dt, "time step override");
    s->add_option("--kmax", o.kmax, "truncation depth (comma list where accepted)")->delimiter(',');
    s->add_option("--out", o.out, "output directory");
    s->add_option("--threads", o.threads, "worker threads (default: CHEOM_THREADS or hardware)");
    if (trajectories) s->add_option("--trajectories", o.trajectories, "ensemble size override");
  };
  auto* run = app.add_subcommand("run", "single conditioned trajectory");
  common(run, false);
  run->add_option("--index", index, "trajectory index");
  auto* ens = app.add_subcommand("ensemble", "trajectory ensemble with statistics");
  common(ens, true);
  auto* scan = app.add_subcommand("scan-lambda", "constant-feedback scan of min-over-time squeezing");
  common(scan, false);
  auto* sw = app.add_subcommand("switch-protocol", "piecewise feedback lambda+ -> lambda- -> lambda+");
  common(sw, false);
  auto* cmp = app.add_subcommand("compare-oracle", "shared-noise comparison against the full-space oracle");
  common(cmp, true);
  auto* cnt = app.add_subcommand("count-aux", "number of auxiliary matrices");
  cnt->add_option("--modes", modes, "number of modes")->required();
  cnt->add_option("--kmax", kmax_count, "truncation depth")->required();
  auto* val = app.add_subcommand("validate", "parse and validate a config");
  val->add_option("--config", o.config, "scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cnt) {
      if (modes < 1 || kmax_count < 0) throw ConfigError("count-aux", "need --modes >= 1 and --kmax >= 0");
      std::printf("%llu\n", static_cast<unsigned long long>(aux_count(modes, kmax_count)));
      return 0;
    }
    if (*val) {
      const ScenarioConfig cfg = parse_config_file(o.config);
      std::printf("ok: %s (%s, %zu modes)\n", cfg.name.c_str(), cfg.system.type.c_str(), cfg.modes.size());
      return 0;
    }
    if (*run) return cmd_run(o, index);
    if (*ens) return cmd_ensemble(o);
    if (*scan) return cmd_scan(o);
    if (*sw) return cmd_switch(o);
    if (*cmp) return cmd_compare(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
