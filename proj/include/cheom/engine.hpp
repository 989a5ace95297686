#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cheom/hierarchy.hpp"
#include "cheom/noise.hpp"

namespace cheom {

struct ModeSpec {
  double g = 0.0;
  double delta = 0.0;
  double kappa = 1.0;
  Mat L;  // coupling operator on atom space
  Detection detection = Detection::homodyne;

  cplx w() const { return {kappa, delta}; }
};

// Feedback H_fb = J_hom,k * lambda(t) * op. For the squeezing protocol op = J_y / sqrt(2 kappa).
struct FeedbackSpec {
  std::size_t mode = 0;
  Mat op;
  // Piecewise-constant schedule: lambda = values[i] for times[i] <= t < times[i+1]; times[0] = 0.
  std::vector<double> times{0.0};
  std::vector<double> values{0.0};
  // Dynamic rule lambda = 2 kappa <num X> / <den> (num = J_z, den = J_x for squeezing).
  bool dynamic = false;
  bool centered = false;          // use <num X> - <num><X> (exact cancellation)
  bool hold_on_singular = true;   // keep last finite lambda when |<den>| < 1e-9
  Mat dyn_num, dyn_den;

  double scheduled(double t) const;
};

enum class Integrator { euler_maruyama, kraus };
Integrator integrator_from_string(const std::string& s);
std::string to_string(Integrator i);

struct Model {
  Mat H_A;
  std::vector<ModeSpec> modes;
  std::optional<FeedbackSpec> feedback;
  double theta = 0.0;  // jump-rate ordering offset: <a†a>_N = tr rho(e,e)/g^2 - theta

  int atom_dim() const { return static_cast<int>(H_A.rows()); }
  void validate() const;
};

struct StepInfo {
  std::vector<std::uint8_t> jumped;  // per mode
  std::vector<cplx> current;  // per mode: homodyne J (real), heterodyne J (complex); 0 otherwise
  double lambda = 0.0;
};

class Engine {
 public:
  Engine(Model model, int kmax);

  const Model& model() const { return model_; }
  const IndexSet& indices() const { return *set_; }
  std::shared_ptr<const IndexSet> index_ptr() const { return set_; }

  HierarchyState initial_state(const Mat& rho_a) const;

  // Deterministic part of the Ito hierarchy (no measurement, no feedback).
  Hierarchy drift(const Hierarchy& x) const;
  // drift + averaged feedback terms at strength lambda.
  Hierarchy averaged_rhs(const Hierarchy& x, double lambda) const;

  double quadrature(const Hierarchy& x, std::size_t k) const;
  cplx mean_a(const Hierarchy& x, std::size_t k) const;
  double photon_number(const Hierarchy& x, std::size_t k) const;  // normal order <a†a>
  cplx moment(const Hierarchy& x, const MultiIndex& mi) const;     // <prod a†^m a^n> (normal order)
  double current(const Hierarchy& x, std::size_t k, double dw, double dt) const;
  // <O X_k> = tr(O (rho^{e,0} - rho^{0,e})) / (i g)
  double correlation_x(const Hierarchy& x, std::size_t k, const Mat& op) const;

  Hierarchy homodyne_term(const Hierarchy& x, const StepNoise& noise) const;
  Hierarchy heterodyne_term(const Hierarchy& x, const StepNoise& noise) const;
  Hierarchy feedback_increment(const Hierarchy& x, double lambda, double dw, double dt) const;
  double dynamic_lambda(const Hierarchy& x) const;  // throws std::domain_error "feedback singular"

  StepInfo step(HierarchyState& s, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index, double dt,
                Integrator integ) const;
  StepInfo step_ito(HierarchyState& s, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index,
                    double dt) const;
  StepInfo step_kraus(HierarchyState& s, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index,
                      double dt) const;
  // Heun step of the single-mode Stratonovich hierarchy driven by the measured current J.
  void step_stratonovich(HierarchyState& s, double current, double dt) const;
  // One RK4 step of the averaged hierarchy with feedback strength taken from the schedule.
  void step_averaged(HierarchyState& s, double dt) const;

  // Apply the photodetection jump of mode k in place.
  void apply_jump(Hierarchy& x, std::size_t k) const;
  static void renormalize(Hierarchy& x);

 private:
  Model model_;
  std::shared_ptr<const IndexSet> set_;
  AtomOp H_;
  std::vector<AtomOp> L_, Ld_;
  AtomOp fb_;

  double lambda_now(HierarchyState& s) const;
  Hierarchy left_A(const Hierarchy& x) const;
  Hierarchy right_Adag(const Hierarchy& x) const;
  Hierarchy stratonovich_f(const Hierarchy& x) const;
  Hierarchy stratonovich_g(const Hierarchy& x) const;
  void check_trace(const Hierarchy& x) const;
};

}  // namespace cheom
