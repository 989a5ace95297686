#pragma once

#include <vector>

#include "cheom/engine.hpp"

namespace cheom {

// Atom space tensored with one truncated Fock space per mode (levels 0..n_max).
struct FullModel {
  Layout layout;
  int atom_dim = 0;
  std::vector<int> n_max;
  SpMat H;                   // H_AC
  std::vector<SpMat> a;      // per mode
  std::vector<double> kappa;
  std::vector<Detection> detection;
  std::vector<std::vector<int>> top_level;  // flat indices with n_k = n_max
  std::optional<FeedbackSpec> feedback;
  SpMat fb_num, fb_den;      // embedded operators for the dynamic rule
};

FullModel build_full_model(const Model& m, const std::vector<int>& n_max);

struct OracleVector {
  Vec psi;
  double time = 0.0;
  double last_lambda = 0.0;
  bool leakage = false;
};

struct OracleDensity {
  Mat rho;
  double time = 0.0;
  double last_lambda = 0.0;
  bool leakage = false;
};

OracleVector oracle_vector(const FullModel& fm, const Vec& atom_psi);   // atom ⊗ vacuum
OracleDensity oracle_density(const FullModel& fm, const Mat& atom_rho);

constexpr double kLeakageBound = 1e-4;

// Stochastic steps. Increments are consumed per mode in mode order; photodetect modes use the jump driver.
StepInfo sse_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, JumpDriver* jumps,
                  std::size_t step_index, double dt, Integrator integ);
StepInfo sme_step(const FullModel& fm, OracleDensity& s, const StepNoise& noise, JumpDriver* jumps,
                  std::size_t step_index, double dt, Integrator integ);

StepInfo sse_homodyne_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, double dt,
                           Integrator integ = Integrator::euler_maruyama);
StepInfo sme_homodyne_step(const FullModel& fm, OracleDensity& s, const StepNoise& noise, double dt,
                           Integrator integ = Integrator::euler_maruyama);
StepInfo sse_heterodyne_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, double dt,
                             Integrator integ = Integrator::euler_maruyama);
StepInfo sse_jump_step(const FullModel& fm, OracleVector& s, JumpDriver& jumps, std::size_t step_index, double dt);

// Deterministic Lindblad equation (optionally with the averaged feedback terms), RK4.
void lindblad_step(const FullModel& fm, OracleDensity& s, double dt);

Mat reduced_state(const FullModel& fm, const Vec& psi);
Mat reduced_state(const FullModel& fm, const Mat& rho);

double top_population(const FullModel& fm, const Vec& psi);
double top_population(const FullModel& fm, const Mat& rho);

// Full-system expectation values.
double oracle_quadrature(const FullModel& fm, const Vec& psi, std::size_t k);
double oracle_quadrature(const FullModel& fm, const Mat& rho, std::size_t k);
cplx oracle_expect(const SpMat& op, const Vec& psi);
cplx oracle_expect(const SpMat& op, const Mat& rho);

}  // namespace cheom
