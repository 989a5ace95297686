#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cheom/config.hpp"
#include "cheom/engine.hpp"
#include "cheom/oracle.hpp"

namespace cheom {

ScenarioConfig build_jaynes_cummings(double omega, double epsilon, double g, double delta, double kappa);
ScenarioConfig build_dicke_clusters(double Omega, int n_clusters, int n_atoms,
                                    const std::vector<std::vector<double>>& g_matrix, double delta, double kappa,
                                    const std::vector<bool>& monitored);
// feedback may be empty (no feedback)
ScenarioConfig build_spin_squeezing(double Omega, int n_atoms, double g, double kappa,
                                    std::optional<FeedbackConfig> feedback);

// Config resolved into operators and an initial atom state.
struct Scenario {
  ScenarioConfig cfg;
  Model model;
  Mat rho0;
  Layout atom_layout;
};

Scenario make_scenario(const ScenarioConfig& cfg);

// Observable catalogue. Names expand into columns "<name>[.<component>]".
//   purity, entropy, bloch (two-level only), X, n, spin, jzx, lambda, rho, S13, I13, N13
class Observer {
 public:
  Observer(const Scenario& sc, const Engine& engine, const std::vector<std::string>& names);

  const std::vector<std::string>& columns() const { return columns_; }
  // Columns that depend only on rho_A (usable on ensemble-mean states).
  const std::vector<std::string>& state_columns() const { return state_columns_; }

  void sample(const Hierarchy& x, const StepInfo* info, double lambda, std::vector<double>& out) const;
  void sample_state(const Mat& rho, std::vector<double>& out) const;

 private:
  void eval_state(const std::string& name, const Mat& rho, std::vector<double>& out) const;

  const Scenario& sc_;
  const Engine& engine_;
  Mat jx_, jy_, jz_;
  std::vector<std::string> names_, state_names_;
  std::vector<std::string> columns_, state_columns_;
};

struct RunRecord {
  std::vector<double> t;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> series;   // series[c][grid]
  std::vector<std::vector<cplx>> currents;   // per mode, one per step (measured at the start of the step)
  std::vector<std::vector<double>> jump_times;  // per mode
  std::vector<Mat> states;                   // rho_A per grid point (when requested)
  std::uint64_t seed = 0;
  std::size_t index = 0;
};

struct RunOptions {
  bool keep_states = false;
  bool keep_currents = true;
};

std::vector<double> time_grid(const ScenarioConfig& cfg);
std::vector<std::size_t> record_steps(const ScenarioConfig& cfg);

RunRecord run_trajectory(const Scenario& sc, std::size_t trajectory_index, const RunOptions& opt = {});
RunRecord run_trajectory(const Scenario& sc, const Engine& engine, std::size_t trajectory_index,
                         const RunOptions& opt = {});

struct EnsembleResult {
  std::size_t trajectories = 0;
  std::vector<double> t;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> mean, se;  // [c][grid]
  std::vector<Mat> mean_state;
  // observables of the mean state plus information gains
  std::vector<std::string> state_columns;
  std::vector<std::vector<double>> state_series;
};

// Thread count: explicit value if > 0, else CHEOM_THREADS, else hardware concurrency.
unsigned resolve_threads(unsigned requested);
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

EnsembleResult run_ensemble(const Scenario& sc, std::size_t trajectories, unsigned threads = 0);

struct DeterministicSeries {
  std::vector<double> t;
  std::vector<Mat> states;
  std::vector<double> lambda;
  std::vector<double> xi2;   // collective spin only, NaN where undefined
  std::vector<double> X;     // quadrature of mode 0
  std::vector<double> jzx;   // <J_z X> (collective spin only)
  double min_xi2 = 1.0;      // minimum over every step, starting value included
  double t_min = 0.0;
};

// Averaged hierarchy including averaged feedback terms, no noise. Dynamic lambda is rejected.
DeterministicSeries feedback_master_equation(const Scenario& sc);
DeterministicSeries feedback_master_equation(const Scenario& sc, const Engine& engine);

struct ScanPoint {
  double lambda = 0.0;
  double min_xi2 = 1.0;
  double t_min = 0.0;
};

std::vector<double> lambda_grid(double lo, double hi, double step);
// Constant-lambda feedback master equation per lambda, min over time of xi^2. Parallel over lambda.
std::vector<ScanPoint> lambda_scan(const Scenario& base, const std::vector<double>& lambdas, int kmax,
                                   unsigned threads = 0);
// Interior strict local minima with min_xi2 below 1.
std::vector<ScanPoint> scan_minima(const std::vector<ScanPoint>& pts);

DeterministicSeries switching_protocol(const Scenario& base, double lambda_plus, double lambda_minus, double t1,
                                       double t2);

struct CompareReport {
  std::vector<double> t;
  std::vector<std::string> methods;           // "kmax=2", ..., "redfield", "bad_cavity"
  std::vector<std::vector<double>> mean, se;  // [method][grid]
  std::vector<double> time_average;           // per method
  std::vector<double> max_distance;           // per method, worst over trajectories and grid
  double max_oracle_leakage = 0.0;
};

struct CompareOptions {
  bool redfield = true;
  bool bad_cavity = true;
  unsigned threads = 0;
};

CompareReport oracle_compare(const Scenario& sc, std::size_t trajectories, const std::vector<int>& kmax_list,
                             const CompareOptions& opt = {});

// Operators used by the dynamic feedback rule and the spin observables.
Mat spin_operator(const Scenario& sc, char axis);

}  // namespace cheom
