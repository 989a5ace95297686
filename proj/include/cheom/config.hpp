#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cheom/engine.hpp"

namespace cheom {

// Validation failure with the offending field path, e.g. "modes[0].kappa".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SystemConfig {
  std::string type;  // jaynes_cummings | dicke_clusters | collective_spin
  double omega = 1.0;
  double epsilon = 0.0;
  double Omega = 1.0;
  int n_clusters = 0;
  int n_atoms = 0;
  std::vector<std::vector<double>> g_matrix;  // clusters x modes
  std::string initial;
};

struct ModeConfig {
  std::optional<double> g;
  double delta = 0.0;
  double kappa = 1.0;
  Detection detection = Detection::homodyne;
};

struct FeedbackConfig {
  std::size_t mode = 0;
  std::string op = "Jy";
  std::vector<double> times{0.0};
  std::vector<double> values{0.0};
  bool dynamic = false;
  bool centered = false;
  bool hold_on_singular = true;
};

struct ScanConfig {
  double lambda_min = -0.6;
  double lambda_max = 0.8;
  double lambda_step = 0.01;
};

struct SwitchingConfig {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string unit_frequency = "omega";
  SystemConfig system;
  std::vector<ModeConfig> modes;
  int k_max = 2;
  double dt = 1e-3;
  double t_final = 5.0;
  int record_every = 10;
  Integrator integrator = Integrator::euler_maruyama;
  std::size_t trajectories = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::string> outputs;
  std::vector<int> oracle_n_max;
  double theta = 0.0;
  std::optional<FeedbackConfig> feedback;
  std::optional<ScanConfig> scan;
  std::optional<SwitchingConfig> switching;

  std::size_t steps() const;
  nlohmann::json to_json() const;
};

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig parse_config_file(const std::string& path);
void validate(const ScenarioConfig& c);  // throws ConfigError

}  // namespace cheom
