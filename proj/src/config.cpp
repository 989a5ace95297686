#include "cheom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace cheom {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

const json& req(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(join(path, key), "missing required field");
  return j.at(key);
}

std::vector<double> num_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace

std::size_t ScenarioConfig::steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }

ScenarioConfig parse_config(const json& j) {
  only_keys(j, "", {"name", "unit_frequency", "system", "modes", "k_max", "dt", "t_final", "record_every",
                    "integrator", "ensemble", "outputs", "oracle", "jump_rate_offset", "feedback", "scan",
                    "switching"});
  ScenarioConfig c;
  if (j.contains("name")) c.name = str(j["name"], "name");
  if (j.contains("unit_frequency")) c.unit_frequency = str(j["unit_frequency"], "unit_frequency");

  const json& sys = req(j, "", "system");
  only_keys(sys, "system", {"type", "omega", "epsilon", "Omega", "n_clusters", "n_atoms", "g_matrix", "initial"});
  c.system.type = str(req(sys, "system", "type"), "system.type");
  if (sys.contains("omega")) c.system.omega = num(sys["omega"], "system.omega");
  if (sys.contains("epsilon")) c.system.epsilon = num(sys["epsilon"], "system.epsilon");
  if (sys.contains("Omega")) c.system.Omega = num(sys["Omega"], "system.Omega");
  if (sys.contains("n_clusters")) c.system.n_clusters = integer(sys["n_clusters"], "system.n_clusters");
  if (sys.contains("n_atoms")) c.system.n_atoms = integer(sys["n_atoms"], "system.n_atoms");
  if (sys.contains("initial")) c.system.initial = str(sys["initial"], "system.initial");
  if (sys.contains("g_matrix")) {
    const json& gm = sys["g_matrix"];
    if (!gm.is_array()) throw ConfigError("system.g_matrix", "expected an array of rows");
    for (std::size_t r = 0; r < gm.size(); ++r)
      c.system.g_matrix.push_back(num_list(gm[r], "system.g_matrix[" + std::to_string(r) + "]"));
  }

  const json& modes = req(j, "", "modes");
  if (!modes.is_array()) throw ConfigError("modes", "expected an array");
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const std::string p = "modes[" + std::to_string(k) + "]";
    only_keys(modes[k], p, {"g", "delta", "kappa", "detection"});
    ModeConfig m;
    if (modes[k].contains("g")) m.g = num(modes[k]["g"], p + ".g");
    if (modes[k].contains("delta")) m.delta = num(modes[k]["delta"], p + ".delta");
    m.kappa = num(req(modes[k], p, "kappa"), p + ".kappa");
    if (modes[k].contains("detection")) {
      try {
        m.detection = detection_from_string(str(modes[k]["detection"], p + ".detection"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(p + ".detection", e.what());
      }
    }
    c.modes.push_back(m);
  }

  if (j.contains("k_max")) c.k_max = integer(j["k_max"], "k_max");
  if (j.contains("dt")) c.dt = num(j["dt"], "dt");
  if (j.contains("t_final")) c.t_final = num(j["t_final"], "t_final");
  if (j.contains("record_every")) c.record_every = integer(j["record_every"], "record_every");
  if (j.contains("integrator")) {
    try {
      c.integrator = integrator_from_string(str(j["integrator"], "integrator"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("integrator", e.what());
    }
  }
  if (j.contains("ensemble")) {
    const json& e = j["ensemble"];
    only_keys(e, "ensemble", {"trajectories", "master_seed"});
    if (e.contains("trajectories")) {
      int t = integer(e["trajectories"], "ensemble.trajectories");
      if (t < 1) throw ConfigError("ensemble.trajectories", "must be >= 1");
      c.trajectories = static_cast<std::size_t>(t);
    }
    if (e.contains("master_seed")) {
      if (!e["master_seed"].is_number_unsigned() && !e["master_seed"].is_number_integer())
        throw ConfigError("ensemble.master_seed", "expected a non-negative integer");
      c.master_seed = e["master_seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("outputs")) {
    if (!j["outputs"].is_array()) throw ConfigError("outputs", "expected an array");
    for (std::size_t i = 0; i < j["outputs"].size(); ++i)
      c.outputs.push_back(str(j["outputs"][i], "outputs[" + std::to_string(i) + "]"));
  }
  if (j.contains("oracle")) {
    only_keys(j["oracle"], "oracle", {"n_max"});
    if (j["oracle"].contains("n_max")) {
      for (double v : num_list(j["oracle"]["n_max"], "oracle.n_max")) c.oracle_n_max.push_back(static_cast<int>(v));
    }
  }
  if (j.contains("jump_rate_offset")) c.theta = num(j["jump_rate_offset"], "jump_rate_offset");
  if (j.contains("feedback")) {
    const json& f = j["feedback"];
    only_keys(f, "feedback", {"mode", "operator", "lambda"});
    FeedbackConfig fb;
    if (f.contains("mode")) fb.mode = static_cast<std::size_t>(integer(f["mode"], "feedback.mode"));
    if (f.contains("operator")) fb.op = str(f["operator"], "feedback.operator");
    const json& l = req(f, "feedback", "lambda");
    only_keys(l, "feedback.lambda", {"constant", "schedule", "dynamic", "centered", "hold_on_singular"});
    int kinds = 0;
    if (l.contains("constant")) {
      fb.times = {0.0};
      fb.values = {num(l["constant"], "feedback.lambda.constant")};
      ++kinds;
    }
    if (l.contains("schedule")) {
      only_keys(l["schedule"], "feedback.lambda.schedule", {"times", "values"});
      fb.times = num_list(req(l["schedule"], "feedback.lambda.schedule", "times"), "feedback.lambda.schedule.times");
      fb.values = num_list(req(l["schedule"], "feedback.lambda.schedule", "values"), "feedback.lambda.schedule.values");
      ++kinds;
    }
    if (l.contains("dynamic")) {
      fb.dynamic = boolean(l["dynamic"], "feedback.lambda.dynamic");
      if (fb.dynamic) ++kinds;
    }
    if (l.contains("centered")) fb.centered = boolean(l["centered"], "feedback.lambda.centered");
    if (l.contains("hold_on_singular")) fb.hold_on_singular = boolean(l["hold_on_singular"], "feedback.lambda.hold_on_singular");
    if (kinds != 1) throw ConfigError("feedback.lambda", "exactly one of constant, schedule, dynamic required");
    c.feedback = fb;
  }
  if (j.contains("scan")) {
    only_keys(j["scan"], "scan", {"lambda_min", "lambda_max", "lambda_step"});
    ScanConfig s;
    if (j["scan"].contains("lambda_min")) s.lambda_min = num(j["scan"]["lambda_min"], "scan.lambda_min");
    if (j["scan"].contains("lambda_max")) s.lambda_max = num(j["scan"]["lambda_max"], "scan.lambda_max");
    if (j["scan"].contains("lambda_step")) s.lambda_step = num(j["scan"]["lambda_step"], "scan.lambda_step");
    c.scan = s;
  }
  if (j.contains("switching")) {
    const json& s = j["switching"];
    only_keys(s, "switching", {"lambda_plus", "lambda_minus", "t1", "t2"});
    SwitchingConfig w;
    w.lambda_plus = num(req(s, "switching", "lambda_plus"), "switching.lambda_plus");
    w.lambda_minus = num(req(s, "switching", "lambda_minus"), "switching.lambda_minus");
    w.t1 = num(req(s, "switching", "t1"), "switching.t1");
    w.t2 = num(req(s, "switching", "t2"), "switching.t2");
    c.switching = w;
  }
  validate(c);
  return c;
}

ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

void validate(const ScenarioConfig& c) {
  if (c.unit_frequency != "omega" && c.unit_frequency != "Omega")
    throw ConfigError("unit_frequency", "must be \"omega\" or \"Omega\"");
  if (c.modes.empty()) throw ConfigError("modes", "at least one mode required");
  for (std::size_t k = 0; k < c.modes.size(); ++k) {
    const std::string p = "modes[" + std::to_string(k) + "]";
    if (!(c.modes[k].kappa > 0.0) || !std::isfinite(c.modes[k].kappa)) throw ConfigError(p + ".kappa", "must be positive");
    if (c.modes[k].g && !std::isfinite(*c.modes[k].g)) throw ConfigError(p + ".g", "must be finite");
  }
  const auto& s = c.system;
  if (s.type == "jaynes_cummings") {
    if (!(s.omega > 0.0)) throw ConfigError("system.omega", "must be positive");
    if (c.modes.size() != 1) throw ConfigError("modes", "Jaynes-Cummings takes exactly one mode");
    if (!c.modes[0].g) throw ConfigError("modes[0].g", "missing required field");
    if (!s.initial.empty() && s.initial != "excited" && s.initial != "ground")
      throw ConfigError("system.initial", "must be \"excited\" or \"ground\"");
  } else if (s.type == "dicke_clusters") {
    if (s.n_clusters < 1) throw ConfigError("system.n_clusters", "must be >= 1");
    if (s.n_atoms < 1) throw ConfigError("system.n_atoms", "must be >= 1");
    if (s.g_matrix.size() != static_cast<std::size_t>(s.n_clusters))
      throw ConfigError("system.g_matrix", "expected " + std::to_string(s.n_clusters) + " rows (one per cluster)");
    for (std::size_t r = 0; r < s.g_matrix.size(); ++r)
      if (s.g_matrix[r].size() != c.modes.size())
        throw ConfigError("system.g_matrix[" + std::to_string(r) + "]",
                          "expected " + std::to_string(c.modes.size()) + " columns (one per mode)");
    for (std::size_t k = 0; k < c.modes.size(); ++k)
      if (c.modes[k].g) throw ConfigError("modes[" + std::to_string(k) + "].g", "couplings come from system.g_matrix");
    if (!s.initial.empty() && s.initial != "up" && s.initial != "down" && s.initial != "css_x")
      throw ConfigError("system.initial", "must be \"up\", \"down\" or \"css_x\"");
  } else if (s.type == "collective_spin") {
    if (s.n_atoms < 2) throw ConfigError("system.n_atoms", "must be >= 2");
    if (c.modes.size() != 1) throw ConfigError("modes", "collective spin model takes exactly one mode");
    if (!c.modes[0].g) throw ConfigError("modes[0].g", "missing required field");
    if (!s.initial.empty() && s.initial != "css_x") throw ConfigError("system.initial", "must be \"css_x\"");
  } else {
    throw ConfigError("system.type", "unknown system type '" + s.type + "'");
  }
  static const std::set<std::string> known{"purity", "entropy", "bloch", "X", "n", "spin", "jzx",
                                           "lambda", "rho", "S13", "I13", "N13"};
  for (std::size_t i = 0; i < c.outputs.size(); ++i) {
    const std::string p = "outputs[" + std::to_string(i) + "]";
    const auto& o = c.outputs[i];
    if (!known.count(o)) throw ConfigError(p, "unknown observable '" + o + "'");
    if (o == "bloch" && s.type != "jaynes_cummings") throw ConfigError(p, "'bloch' needs the two-level model");
    if ((o == "spin" || o == "jzx") && s.type != "collective_spin") throw ConfigError(p, "needs the collective spin model");
    if ((o == "S13" || o == "I13" || o == "N13") && (s.type != "dicke_clusters" || s.n_clusters < 3))
      throw ConfigError(p, "needs at least three clusters");
    if ((o == "X" || o == "jzx") && c.k_max < 1) throw ConfigError(p, "needs k_max >= 1");
    if (o == "n" && c.k_max < 2) throw ConfigError(p, "needs k_max >= 2");
  }
  for (std::size_t k = 0; k < c.modes.size(); ++k)
    if (c.modes[k].detection == Detection::photodetect && c.k_max < 2)
      throw ConfigError("modes[" + std::to_string(k) + "].detection", "photodetection needs k_max >= 2");
  if (c.k_max < 0) throw ConfigError("k_max", "must be >= 0");
  if (!(c.dt > 0.0)) throw ConfigError("dt", "must be positive");
  if (!(c.t_final > 0.0)) throw ConfigError("t_final", "must be positive");
  if (c.record_every < 1) throw ConfigError("record_every", "must be >= 1");
  if (!c.oracle_n_max.empty() && c.oracle_n_max.size() != c.modes.size())
    throw ConfigError("oracle.n_max", "one cutoff per mode required");
  for (std::size_t k = 0; k < c.oracle_n_max.size(); ++k)
    if (c.oracle_n_max[k] < 1) throw ConfigError("oracle.n_max[" + std::to_string(k) + "]", "must be >= 1");
  if (c.theta != 0.0 && c.theta != 1.0) throw ConfigError("jump_rate_offset", "must be 0 or 1");
  if (c.feedback) {
    const auto& f = *c.feedback;
    if (f.mode >= c.modes.size()) throw ConfigError("feedback.mode", "out of range");
    if (c.modes[f.mode].detection != Detection::homodyne)
      throw ConfigError("feedback.mode", "feedback requires a homodyne-monitored mode");
    if (f.op != "Jx" && f.op != "Jy" && f.op != "Jz" && f.op != "sx" && f.op != "sy" && f.op != "sz")
      throw ConfigError("feedback.operator", "must be one of Jx, Jy, Jz, sx, sy, sz");
    if (f.times.size() != f.values.size() || f.times.empty())
      throw ConfigError("feedback.lambda.schedule", "times and values must be non-empty and of equal length");
    for (std::size_t i = 1; i < f.times.size(); ++i)
      if (!(f.times[i] > f.times[i - 1])) throw ConfigError("feedback.lambda.schedule.times", "must be increasing");
    if (f.dynamic && c.system.type != "collective_spin")
      throw ConfigError("feedback.lambda.dynamic", "dynamic rule defined for the collective spin model only");
  }
  if (c.switching) {
    const auto& w = *c.switching;
    if (!(0.0 < w.t1 && w.t1 < w.t2 && w.t2 < c.t_final))
      throw ConfigError("switching", "need 0 < t1 < t2 < t_final");
  }
  if (c.scan && !(c.scan->lambda_step > 0.0 && c.scan->lambda_max >= c.scan->lambda_min))
    throw ConfigError("scan", "need lambda_step > 0 and lambda_max >= lambda_min");
}

nlohmann::json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["unit_frequency"] = unit_frequency;
  json s;
  s["type"] = system.type;
  if (system.type == "jaynes_cummings") {
    s["omega"] = system.omega;
    s["epsilon"] = system.epsilon;
  } else {
    s["Omega"] = system.Omega;
    s["n_atoms"] = system.n_atoms;
  }
  if (system.type == "dicke_clusters") {
    s["n_clusters"] = system.n_clusters;
    s["g_matrix"] = system.g_matrix;
  }
  if (!system.initial.empty()) s["initial"] = system.initial;
  j["system"] = s;
  j["modes"] = json::array();
  for (const auto& m : modes) {
    json mj{{"delta", m.delta}, {"kappa", m.kappa}, {"detection", to_string(m.detection)}};
    if (m.g) mj["g"] = *m.g;
    j["modes"].push_back(mj);
  }
  j["k_max"] = k_max;
  j["dt"] = dt;
  j["t_final"] = t_final;
  j["record_every"] = record_every;
  j["integrator"] = to_string(integrator);
  j["ensemble"] = {{"trajectories", trajectories}, {"master_seed", master_seed}};
  j["outputs"] = outputs;
  if (!oracle_n_max.empty()) j["oracle"] = {{"n_max", oracle_n_max}};
  j["jump_rate_offset"] = theta;
  if (feedback) {
    json l;
    if (feedback->dynamic) {
      l = {{"dynamic", true}, {"centered", feedback->centered}, {"hold_on_singular", feedback->hold_on_singular}};
    } else {
      l = {{"schedule", {{"times", feedback->times}, {"values", feedback->values}}}};
    }
    j["feedback"] = {{"mode", feedback->mode}, {"operator", feedback->op}, {"lambda", l}};
  }
  if (scan) j["scan"] = {{"lambda_min", scan->lambda_min}, {"lambda_max", scan->lambda_max}, {"lambda_step", scan->lambda_step}};
  if (switching)
    j["switching"] = {{"lambda_plus", switching->lambda_plus}, {"lambda_minus", switching->lambda_minus},
                      {"t1", switching->t1}, {"t2", switching->t2}};
  return j;
}

}  // namespace cheom
