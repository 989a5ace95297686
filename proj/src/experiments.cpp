#include "cheom/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "cheom/measures.hpp"
#include "cheom/redfield.hpp"

namespace cheom {

namespace {

// truncated hierarchy states carry small negative eigenvalues
constexpr double kTruncationTol = 1e-4;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Mat css_x(int n_atoms) {
  const int d = n_atoms + 1;
  Vec up = Vec::Zero(d);
  up(0) = 1.0;  // |j, m=j>
  const Vec psi = expm_hermitian(collective_spin(n_atoms, 'y'), -I1 * (std::numbers::pi / 2.0)) * up;
  return ket_projector(psi);
}

Mat basis_projector(int d, int i) {
  Mat p = Mat::Zero(d, d);
  p(i, i) = 1.0;
  return p;
}

// sigma_z with the excited state (index 1) at +1
Mat jc_sigma_z() {
  Mat z = Mat::Zero(2, 2);
  z(0, 0) = -1.0;
  z(1, 1) = 1.0;
  return z;
}

// sigma_y in the ground-first basis: i(sigma_- - sigma_+)
Mat jc_sigma_y() {
  Mat s = annihilation_op(2);
  return I1 * (s - s.adjoint());
}

Mat feedback_operator(const ScenarioConfig& cfg, const std::string& name) {
  const auto& s = cfg.system;
  const char axis = name.back();
  if (name[0] == 'J') {
    if (s.type != "collective_spin") throw ConfigError("feedback.operator", "J operators need the collective spin model");
    return collective_spin(s.n_atoms, axis);
  }
  if (s.type != "jaynes_cummings") throw ConfigError("feedback.operator", "Pauli operators need the two-level model");
  if (axis == 'x') return pauli_x();
  if (axis == 'y') return jc_sigma_y();
  return jc_sigma_z();
}

double real_trace(const Mat& op, const Mat& rho) { return (op * rho).trace().real(); }

}  // namespace

ScenarioConfig build_jaynes_cummings(double omega, double epsilon, double g, double delta, double kappa) {
  ScenarioConfig c;
  c.name = epsilon == 0.0 ? "jaynes_cummings" : "driven_jaynes_cummings";
  c.unit_frequency = "omega";
  c.system.type = "jaynes_cummings";
  c.system.omega = omega;
  c.system.epsilon = epsilon;
  c.system.initial = "excited";
  ModeConfig m;
  m.g = g;
  m.delta = delta;
  m.kappa = kappa;
  m.detection = Detection::homodyne;
  c.modes = {m};
  c.t_final = 5.0;
  c.outputs = {"purity", "bloch"};
  c.oracle_n_max = {6};
  validate(c);
  return c;
}

ScenarioConfig build_dicke_clusters(double Omega, int n_clusters, int n_atoms,
                                    const std::vector<std::vector<double>>& g_matrix, double delta, double kappa,
                                    const std::vector<bool>& monitored) {
  ScenarioConfig c;
  c.name = "dicke_clusters";
  c.unit_frequency = "Omega";
  c.system.type = "dicke_clusters";
  c.system.Omega = Omega;
  c.system.n_clusters = n_clusters;
  c.system.n_atoms = n_atoms;
  c.system.g_matrix = g_matrix;
  c.system.initial = "up";
  const std::size_t n_modes = g_matrix.empty() ? 0 : g_matrix[0].size();
  if (monitored.size() != n_modes) throw ConfigError("monitored", "one flag per mode required");
  for (std::size_t k = 0; k < n_modes; ++k) {
    ModeConfig m;
    m.delta = delta;
    m.kappa = kappa;
    m.detection = monitored[k] ? Detection::homodyne : Detection::unmonitored;
    c.modes.push_back(m);
  }
  c.k_max = 3;
  c.t_final = 3.0;
  c.outputs = {"S13", "I13", "N13"};
  validate(c);
  return c;
}

ScenarioConfig build_spin_squeezing(double Omega, int n_atoms, double g, double kappa,
                                    std::optional<FeedbackConfig> feedback) {
  ScenarioConfig c;
  c.name = "spin_squeezing";
  c.unit_frequency = "Omega";
  c.system.type = "collective_spin";
  c.system.Omega = Omega;
  c.system.n_atoms = n_atoms;
  c.system.initial = "css_x";
  ModeConfig m;
  m.g = g;
  m.delta = 0.0;
  m.kappa = kappa;
  m.detection = Detection::homodyne;
  c.modes = {m};
  c.k_max = 6;
  c.dt = 2e-3;
  c.t_final = 6.0;
  c.outputs = {"spin", "X", "jzx", "lambda"};
  c.feedback = std::move(feedback);
  validate(c);
  return c;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Scenario sc;
  sc.cfg = cfg;
  const auto& s = cfg.system;
  Model& m = sc.model;
  m.theta = cfg.theta;
  if (s.type == "jaynes_cummings") {
    m.H_A = 0.5 * s.omega * jc_sigma_z() + 0.5 * s.epsilon * pauli_x();
    ModeSpec md;
    md.g = *cfg.modes[0].g;
    md.delta = cfg.modes[0].delta;
    md.kappa = cfg.modes[0].kappa;
    md.detection = cfg.modes[0].detection;
    md.L = annihilation_op(2);
    m.modes = {md};
    sc.rho0 = basis_projector(2, s.initial == "ground" ? 0 : 1);
    sc.atom_layout = Layout({{"atom", 2}});
  } else if (s.type == "collective_spin") {
    const Mat jz = collective_spin(s.n_atoms, 'z');
    m.H_A = s.Omega * jz;
    ModeSpec md;
    md.g = *cfg.modes[0].g;
    md.delta = cfg.modes[0].delta;
    md.kappa = cfg.modes[0].kappa;
    md.detection = cfg.modes[0].detection;
    md.L = I1 * jz;
    m.modes = {md};
    sc.rho0 = css_x(s.n_atoms);
    sc.atom_layout = Layout({{"atom", s.n_atoms + 1}});
  } else {
    const int nc = s.n_clusters;
    const int dc = s.n_atoms + 1;
    std::vector<Layout::Factor> f;
    for (int i = 0; i < nc; ++i) f.push_back({"c" + std::to_string(i + 1), dc});
    sc.atom_layout = Layout(f);
    const int d = sc.atom_layout.total_dim();
    m.H_A = Mat::Zero(d, d);
    std::vector<Mat> jx(nc);
    const Mat jz1 = collective_spin(s.n_atoms, 'z');
    const Mat jx1 = collective_spin(s.n_atoms, 'x');
    for (int i = 0; i < nc; ++i) {
      const std::string lab = "c" + std::to_string(i + 1);
      m.H_A += s.Omega * embed(jz1, sc.atom_layout, lab);
      jx[i] = embed(jx1, sc.atom_layout, lab);
    }
    for (std::size_t k = 0; k < cfg.modes.size(); ++k) {
      ModeSpec md;
      md.delta = cfg.modes[k].delta;
      md.kappa = cfg.modes[k].kappa;
      md.detection = cfg.modes[k].detection;
      double gk = 0.0;
      for (int i = 0; i < nc; ++i) gk = std::max(gk, std::abs(s.g_matrix[i][k]));
      md.g = gk;
      md.L = Mat::Zero(d, d);
      if (gk > 0.0)
        for (int i = 0; i < nc; ++i) md.L += (s.g_matrix[i][k] / gk) * jx[i];
      m.modes.push_back(md);
    }
    Mat rho1;
    if (s.initial == "down")
      rho1 = basis_projector(dc, dc - 1);
    else if (s.initial == "css_x")
      rho1 = css_x(s.n_atoms);
    else
      rho1 = basis_projector(dc, 0);
    std::vector<Mat> parts(nc, rho1);
    sc.rho0 = kron_compose(parts);
  }
  if (cfg.feedback) {
    const auto& fc = *cfg.feedback;
    FeedbackSpec fb;
    fb.mode = fc.mode;
    fb.op = feedback_operator(cfg, fc.op) / std::sqrt(2.0 * cfg.modes[fc.mode].kappa);
    fb.times = fc.times;
    fb.values = fc.values;
    fb.dynamic = fc.dynamic;
    fb.centered = fc.centered;
    fb.hold_on_singular = fc.hold_on_singular;
    if (fc.dynamic) {
      fb.dyn_num = collective_spin(s.n_atoms, 'z');
      fb.dyn_den = collective_spin(s.n_atoms, 'x');
    }
    m.feedback = fb;
  }
  m.validate();
  return sc;
}

Mat spin_operator(const Scenario& sc, char axis) {
  if (sc.cfg.system.type != "collective_spin") throw std::invalid_argument("spin operators need the collective spin model");
  return collective_spin(sc.cfg.system.n_atoms, axis);
}

// ---------------------------------------------------------------- observables

Observer::Observer(const Scenario& sc, const Engine& engine, const std::vector<std::string>& names)
    : sc_(sc), engine_(engine) {
  const auto& type = sc.cfg.system.type;
  const int d = sc.model.atom_dim();
  const std::size_t M = sc.model.modes.size();
  const int kmax = engine.indices().kmax();
  if (type == "collective_spin") {
    jx_ = collective_spin(sc.cfg.system.n_atoms, 'x');
    jy_ = collective_spin(sc.cfg.system.n_atoms, 'y');
    jz_ = collective_spin(sc.cfg.system.n_atoms, 'z');
  }
  for (const auto& n : names) {
    bool state_only = true;
    std::vector<std::string> cols;
    if (n == "purity" || n == "entropy") {
      cols = {n};
    } else if (n == "bloch") {
      if (d != 2) throw std::invalid_argument("observable 'bloch' needs a two-level atom");
      cols = {"bloch.x", "bloch.y", "bloch.z"};
    } else if (n == "spin") {
      if (type != "collective_spin") throw std::invalid_argument("observable 'spin' needs the collective spin model");
      cols = {"spin.jx", "spin.jy", "spin.jz", "spin.var_jz", "spin.xi2"};
    } else if (n == "rho") {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          cols.push_back("rho.re." + std::to_string(i) + "." + std::to_string(j));
          cols.push_back("rho.im." + std::to_string(i) + "." + std::to_string(j));
        }
    } else if (n == "S13" || n == "I13" || n == "N13") {
      if (type != "dicke_clusters" || sc.cfg.system.n_clusters < 3)
        throw std::invalid_argument("observable '" + n + "' needs at least three clusters");
      cols = {n};
    } else if (n == "X") {
      if (kmax < 1) throw std::invalid_argument("observable 'X' needs k_max >= 1");
      for (std::size_t k = 0; k < M; ++k) cols.push_back("X." + std::to_string(k));
      state_only = false;
    } else if (n == "n") {
      if (kmax < 2) throw std::invalid_argument("observable 'n' needs k_max >= 2");
      for (std::size_t k = 0; k < M; ++k) cols.push_back("n." + std::to_string(k));
      state_only = false;
    } else if (n == "jzx") {
      if (type != "collective_spin" || kmax < 1)
        throw std::invalid_argument("observable 'jzx' needs the collective spin model and k_max >= 1");
      cols = {"jzx"};
      state_only = false;
    } else if (n == "lambda") {
      cols = {"lambda"};
      state_only = false;
    } else {
      throw std::invalid_argument("unknown observable '" + n + "'");
    }
    names_.push_back(n);
    columns_.insert(columns_.end(), cols.begin(), cols.end());
    if (state_only) {
      state_names_.push_back(n);
      state_columns_.insert(state_columns_.end(), cols.begin(), cols.end());
    }
  }
}

void Observer::sample_state(const Mat& rho, std::vector<double>& out) const {
  for (const auto& n : state_names_) eval_state(n, rho, out);
}

void Observer::eval_state(const std::string& n, const Mat& rho, std::vector<double>& out) const {
  {
    if (n == "purity") {
      out.push_back(purity(rho));
    } else if (n == "entropy") {
      out.push_back(von_neumann_entropy(rho, kTruncationTol));
    } else if (n == "bloch") {
      out.push_back(real_trace(pauli_x(), rho));
      out.push_back(real_trace(jc_sigma_y(), rho));
      out.push_back(real_trace(jc_sigma_z(), rho));
    } else if (n == "spin") {
      out.push_back(real_trace(jx_, rho));
      out.push_back(real_trace(jy_, rho));
      const double mz = real_trace(jz_, rho);
      out.push_back(mz);
      out.push_back(real_trace(jz_ * jz_, rho) - mz * mz);
      try {
        out.push_back(spin_squeezing(rho, sc_.cfg.system.n_atoms).xi2);
      } catch (const std::domain_error&) {
        out.push_back(kNaN);
      }
    } else if (n == "rho") {
      for (int i = 0; i < rho.rows(); ++i)
        for (int j = 0; j < rho.cols(); ++j) {
          out.push_back(rho(i, j).real());
          out.push_back(rho(i, j).imag());
        }
    } else {
      const int dc = sc_.cfg.system.n_atoms + 1;
      const Mat r13 = partial_trace(rho, sc_.atom_layout, {"c1", "c3"});
      const Layout l13({{"c1", dc}, {"c3", dc}});
      if (n == "S13")
        out.push_back(von_neumann_entropy(r13, kTruncationTol));
      else if (n == "I13")
        out.push_back(mutual_information(r13, l13, "c1", "c3", kTruncationTol));
      else
        out.push_back(negativity(r13, l13, "c1"));
    }
  }
}

void Observer::sample(const Hierarchy& x, const StepInfo*, double lambda, std::vector<double>& out) const {
  out.clear();
  for (const auto& n : names_) {
    if (n == "X") {
      for (std::size_t k = 0; k < sc_.model.modes.size(); ++k) out.push_back(engine_.quadrature(x, k));
    } else if (n == "n") {
      for (std::size_t k = 0; k < sc_.model.modes.size(); ++k) out.push_back(engine_.photon_number(x, k));
    } else if (n == "jzx") {
      out.push_back(engine_.correlation_x(x, 0, jz_));
    } else if (n == "lambda") {
      out.push_back(lambda);
    } else {
      eval_state(n, x[0], out);
    }
  }
}

// ---------------------------------------------------------------- trajectories

std::vector<std::size_t> record_steps(const ScenarioConfig& cfg) {
  const std::size_t n = cfg.steps();
  std::vector<std::size_t> r;
  for (std::size_t s = 0; s <= n; s += static_cast<std::size_t>(cfg.record_every)) r.push_back(s);
  if (r.back() != n) r.push_back(n);
  return r;
}

std::vector<double> time_grid(const ScenarioConfig& cfg) {
  std::vector<double> t;
  for (std::size_t s : record_steps(cfg)) t.push_back(static_cast<double>(s) * cfg.dt);
  return t;
}

RunRecord run_trajectory(const Scenario& sc, std::size_t index, const RunOptions& opt) {
  Engine engine(sc.model, sc.cfg.k_max);
  return run_trajectory(sc, engine, index, opt);
}

namespace {

double initial_lambda(const Engine& engine, const HierarchyState& s) {
  const auto& fb = engine.model().feedback;
  if (!fb) return 0.0;
  if (!fb->dynamic) return fb->scheduled(s.time);
  try {
    return engine.dynamic_lambda(s.rho);
  } catch (const std::domain_error&) {
    return 0.0;
  }
}

std::vector<NoiseStream> make_streams(const ScenarioConfig& cfg, std::size_t index) {
  std::vector<NoiseStream> streams;
  for (std::size_t k = 0; k < cfg.modes.size(); ++k) streams.emplace_back(stream_seed(cfg.master_seed, index, k));
  return streams;
}

StepNoise draw(std::vector<NoiseStream>& streams, const std::vector<Detection>& kinds, double dt) {
  StepNoise n;
  n.dw.assign(kinds.size(), 0.0);
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    if (kinds[k] == Detection::homodyne) n.dw[k] = streams[k].wiener(dt);
    if (kinds[k] == Detection::heterodyne) n.dw[k] = streams[k].complex_wiener(dt);
  }
  return n;
}

std::vector<Detection> kinds_of(const Model& m) {
  std::vector<Detection> k;
  for (const auto& md : m.modes) k.push_back(md.detection);
  return k;
}

}  // namespace

RunRecord run_trajectory(const Scenario& sc, const Engine& engine, std::size_t index, const RunOptions& opt) {
  const auto& cfg = sc.cfg;
  const std::size_t M = sc.model.modes.size();
  Observer obs(sc, engine, cfg.outputs);
  RunRecord rec;
  rec.index = index;
  rec.seed = cfg.master_seed;
  rec.columns = obs.columns();
  rec.series.assign(rec.columns.size(), {});
  rec.currents.assign(M, {});
  rec.jump_times.assign(M, {});

  const auto kinds = kinds_of(sc.model);
  auto streams = make_streams(cfg, index);
  ThresholdJumpDriver jumps(&streams, kinds);
  HierarchyState s = engine.initial_state(sc.rho0);
  const std::size_t n = cfg.steps();
  const auto rec_steps = record_steps(cfg);
  std::size_t next = 0;
  std::vector<double> row;
  auto record = [&](std::size_t step, double lambda) {
    rec.t.push_back(static_cast<double>(step) * cfg.dt);
    obs.sample(s.rho, nullptr, lambda, row);
    for (std::size_t c = 0; c < row.size(); ++c) rec.series[c].push_back(row[c]);
    if (opt.keep_states) rec.states.push_back(s.rho[0]);
    ++next;
  };
  double lambda = initial_lambda(engine, s);
  if (rec_steps[next] == 0) record(0, lambda);
  for (std::size_t step = 0; step < n; ++step) {
    const StepNoise noise = draw(streams, kinds, cfg.dt);
    const StepInfo info = engine.step(s, noise, &jumps, step, cfg.dt, cfg.integrator);
    s.time = static_cast<double>(step + 1) * cfg.dt;
    lambda = info.lambda;
    if (opt.keep_currents)
      for (std::size_t k = 0; k < M; ++k)
        if (kinds[k] == Detection::homodyne || kinds[k] == Detection::heterodyne) rec.currents[k].push_back(info.current[k]);
    for (std::size_t k = 0; k < M; ++k)
      if (info.jumped[k]) rec.jump_times[k].push_back(s.time);
    if (next < rec_steps.size() && rec_steps[next] == step + 1) record(step + 1, lambda);
  }
  return rec;
}

// ---------------------------------------------------------------- ensembles

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* e = std::getenv("CHEOM_THREADS")) {
    const long v = std::strtol(e, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
          next.store(n);
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

EnsembleResult run_ensemble(const Scenario& sc, std::size_t trajectories, unsigned threads) {
  if (trajectories < 1) throw std::invalid_argument("ensemble needs at least one trajectory");
  Engine engine(sc.model, sc.cfg.k_max);
  Observer obs(sc, engine, sc.cfg.outputs);
  EnsembleResult r;
  r.trajectories = trajectories;
  r.t = time_grid(sc.cfg);
  r.columns = obs.columns();
  const std::size_t G = r.t.size(), C = r.columns.size();
  std::vector<std::vector<double>> sum(C, std::vector<double>(G, 0.0)), sum2 = sum;
  const int d = sc.model.atom_dim();
  r.mean_state.assign(G, Mat::Zero(d, d));
  // entropies of conditioned states for information gain
  const bool want_s13 = std::find(sc.cfg.outputs.begin(), sc.cfg.outputs.end(), "S13") != sc.cfg.outputs.end();
  std::vector<double> ent_sum(G, 0.0), s13_sum(G, 0.0);
  std::vector<double> ent_tmp;

  const unsigned nt = resolve_threads(threads);
  const std::size_t batch = std::max<std::size_t>(1, 4 * static_cast<std::size_t>(nt));
  RunOptions opt;
  opt.keep_states = true;
  opt.keep_currents = false;
  for (std::size_t b0 = 0; b0 < trajectories; b0 += batch) {
    const std::size_t nb = std::min(batch, trajectories - b0);
    std::vector<RunRecord> recs(nb);
    parallel_for(nb, nt, [&](std::size_t i) { recs[i] = run_trajectory(sc, engine, b0 + i, opt); });
    // fixed index order
    for (const auto& rec : recs) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t g = 0; g < G; ++g) {
          const double v = rec.series[c][g];
          sum[c][g] += v;
          sum2[c][g] += v * v;
        }
      for (std::size_t g = 0; g < G; ++g) {
        r.mean_state[g] += rec.states[g];
        ent_sum[g] += von_neumann_entropy(rec.states[g], kTruncationTol);
      }
      if (want_s13) {
        const int c = static_cast<int>(std::find(r.columns.begin(), r.columns.end(), "S13") - r.columns.begin());
        for (std::size_t g = 0; g < G; ++g) s13_sum[g] += rec.series[c][g];
      }
    }
  }
  const double Mn = static_cast<double>(trajectories);
  r.mean.assign(C, std::vector<double>(G, 0.0));
  r.se = r.mean;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t g = 0; g < G; ++g) {
      const double m = sum[c][g] / Mn;
      r.mean[c][g] = m;
      if (trajectories > 1) {
        const double var = std::max(0.0, (sum2[c][g] - Mn * m * m) / (Mn - 1.0));
        r.se[c][g] = std::sqrt(var / Mn);
      }
    }
  for (auto& m : r.mean_state) m /= Mn;

  r.state_columns = obs.state_columns();
  for (auto& c : r.state_columns) c = "mean_state." + c;
  r.state_columns.push_back("info_gain");
  if (want_s13) r.state_columns.push_back("info_gain13");
  r.state_series.assign(r.state_columns.size(), std::vector<double>(G, 0.0));
  std::vector<double> row;
  for (std::size_t g = 0; g < G; ++g) {
    row.clear();
    obs.sample_state(r.mean_state[g], row);
    row.push_back(information_gain(ent_sum[g] / Mn, von_neumann_entropy(r.mean_state[g], kTruncationTol)));
    if (want_s13) {
      const Mat r13 = partial_trace(r.mean_state[g], sc.atom_layout, {"c1", "c3"});
      row.push_back(information_gain(s13_sum[g] / Mn, von_neumann_entropy(r13, kTruncationTol)));
    }
    for (std::size_t c = 0; c < row.size(); ++c) r.state_series[c][g] = row[c];
  }
  return r;
}

// ---------------------------------------------------------------- deterministic feedback dynamics

DeterministicSeries feedback_master_equation(const Scenario& sc) {
  Engine engine(sc.model, sc.cfg.k_max);
  return feedback_master_equation(sc, engine);
}

DeterministicSeries feedback_master_equation(const Scenario& sc, const Engine& engine) {
  if (sc.model.feedback && sc.model.feedback->dynamic)
    throw std::invalid_argument("feedback master equation needs a constant or scheduled lambda");
  const auto& cfg = sc.cfg;
  const bool spin = cfg.system.type == "collective_spin";
  const int na = cfg.system.n_atoms;
  Mat jx, jy, jz, jz2;
  if (spin) {
    jx = collective_spin(na, 'x');
    jy = collective_spin(na, 'y');
    jz = collective_spin(na, 'z');
    jz2 = jz * jz;
  }
  auto xi2_of = [&](const Mat& rho) {
    const double mx = real_trace(jx, rho), my = real_trace(jy, rho), mz = real_trace(jz, rho);
    const double den = mx * mx + my * my;
    if (den < 1e-12) return kNaN;
    return na * (real_trace(jz2, rho) - mz * mz) / den;
  };

  DeterministicSeries out;
  HierarchyState s = engine.initial_state(sc.rho0);
  const std::size_t n = cfg.steps();
  const auto rec_steps = record_steps(cfg);
  std::size_t next = 0;
  const bool has_x = engine.indices().kmax() >= 1;
  auto lam = [&](double t) { return sc.model.feedback ? sc.model.feedback->scheduled(t) : 0.0; };
  auto record = [&](std::size_t step) {
    out.t.push_back(static_cast<double>(step) * cfg.dt);
    out.states.push_back(s.rho[0]);
    out.lambda.push_back(lam(s.time));
    out.xi2.push_back(spin ? xi2_of(s.rho[0]) : kNaN);
    out.X.push_back(has_x ? engine.quadrature(s.rho, 0) : kNaN);
    out.jzx.push_back(spin && has_x ? engine.correlation_x(s.rho, 0, jz) : kNaN);
    ++next;
  };
  auto track_min = [&](double t) {
    if (!spin) return;
    const double v = xi2_of(s.rho[0]);
    if (std::isfinite(v) && v < out.min_xi2) {
      out.min_xi2 = v;
      out.t_min = t;
    }
  };
  out.min_xi2 = spin ? xi2_of(s.rho[0]) : kNaN;
  out.t_min = 0.0;
  if (rec_steps[next] == 0) record(0);
  for (std::size_t step = 0; step < n; ++step) {
    engine.step_averaged(s, cfg.dt);
    s.time = static_cast<double>(step + 1) * cfg.dt;
    track_min(s.time);
    if (next < rec_steps.size() && rec_steps[next] == step + 1) record(step + 1);
  }
  return out;
}

std::vector<double> lambda_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("lambda grid: need step > 0 and hi >= lo");
  std::vector<double> v;
  const long n = std::lround((hi - lo) / step);
  for (long i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
  return v;
}

namespace {

Scenario with_constant_lambda(const Scenario& base, double lambda, int kmax) {
  ScenarioConfig cfg = base.cfg;
  cfg.k_max = kmax;
  FeedbackConfig fb = cfg.feedback ? *cfg.feedback : FeedbackConfig{};
  fb.dynamic = false;
  fb.centered = false;
  fb.times = {0.0};
  fb.values = {lambda};
  cfg.feedback = fb;
  return make_scenario(cfg);
}

}  // namespace

std::vector<ScanPoint> lambda_scan(const Scenario& base, const std::vector<double>& lambdas, int kmax,
                                   unsigned threads) {
  if (base.cfg.system.type != "collective_spin") throw std::invalid_argument("lambda scan needs the collective spin model");
  std::vector<ScanPoint> pts(lambdas.size());
  parallel_for(lambdas.size(), threads, [&](std::size_t i) {
    const Scenario sc = with_constant_lambda(base, lambdas[i], kmax);
    const auto ser = feedback_master_equation(sc);
    pts[i] = {lambdas[i], ser.min_xi2, ser.t_min};
  });
  return pts;
}

std::vector<ScanPoint> scan_minima(const std::vector<ScanPoint>& pts) {
  std::vector<ScanPoint> out;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double v = pts[i].min_xi2;
    if (v < 1.0 - 1e-9 && v < pts[i - 1].min_xi2 && v <= pts[i + 1].min_xi2) out.push_back(pts[i]);
  }
  return out;
}

DeterministicSeries switching_protocol(const Scenario& base, double lambda_plus, double lambda_minus, double t1,
                                       double t2) {
  if (!(0.0 < t1 && t1 < t2 && t2 < base.cfg.t_final)) throw std::invalid_argument("switching: need 0 < t1 < t2 < t_final");
  ScenarioConfig cfg = base.cfg;
  FeedbackConfig fb = cfg.feedback ? *cfg.feedback : FeedbackConfig{};
  fb.dynamic = false;
  fb.centered = false;
  fb.times = {0.0, t1, t2};
  fb.values = {lambda_plus, lambda_minus, lambda_plus};
  cfg.feedback = fb;
  return feedback_master_equation(make_scenario(cfg));
}

// ---------------------------------------------------------------- oracle comparison

CompareReport oracle_compare(const Scenario& sc, std::size_t trajectories, const std::vector<int>& kmax_list,
                             const CompareOptions& opt) {
  if (trajectories < 1) throw std::invalid_argument("comparison needs at least one trajectory");
  const auto& cfg = sc.cfg;
  const std::size_t M = sc.model.modes.size();
  const auto kinds = kinds_of(sc.model);
  const bool single_homodyne = M == 1 && kinds[0] == Detection::homodyne && !sc.model.feedback;
  const bool do_redfield = opt.redfield && single_homodyne;
  const bool do_bad = opt.bad_cavity && single_homodyne;

  std::vector<int> n_max = cfg.oracle_n_max;
  if (n_max.empty()) n_max.assign(M, 6);
  const FullModel fm = build_full_model(sc.model, n_max);
  std::vector<Engine> engines;
  for (int k : kmax_list) engines.emplace_back(sc.model, k);

  CompareReport rep;
  for (int k : kmax_list) rep.methods.push_back("kmax=" + std::to_string(k));
  if (do_redfield) rep.methods.push_back("redfield");
  if (do_bad) rep.methods.push_back("bad_cavity");
  rep.t = time_grid(cfg);
  const std::size_t G = rep.t.size(), Q = rep.methods.size();
  const auto rec_steps = record_steps(cfg);
  const std::size_t n = cfg.steps();

  // pure initial state -> state-vector oracle
  const bool pure = std::abs(purity(sc.rho0) - 1.0) < 1e-12;
  Vec psi0;
  if (pure) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sc.rho0);
    psi0 = es.eigenvectors().col(sc.rho0.rows() - 1);
  }
  std::unique_ptr<RedfieldOperator> red;
  if (do_redfield) {
    const auto& md = sc.model.modes[0];
    red = std::make_unique<RedfieldOperator>(sc.model.H_A, md.L, md.g, md.delta, md.kappa);
  }

  struct TrajOut {
    std::vector<std::vector<double>> td;  // [method][grid]
    double leak = 0.0;
  };
  std::vector<TrajOut> outs(trajectories);
  parallel_for(trajectories, opt.threads, [&](std::size_t tr) {
    auto streams = make_streams(cfg, tr);
    NoisePath path = record_path(streams, n, cfg.dt, kinds);
    // oracle first; its jump realization drives every approximate method
    ThresholdJumpDriver thr(&streams, kinds);
    std::vector<Mat> exact;
    double leak = 0.0;
    if (pure) {
      OracleVector o = oracle_vector(fm, psi0);
      std::size_t next = 0;
      if (rec_steps[0] == 0) exact.push_back(reduced_state(fm, o.psi)), ++next;
      for (std::size_t st = 0; st < n; ++st) {
        sse_step(fm, o, path.at(st), &thr, st, cfg.dt, cfg.integrator);
        leak = std::max(leak, top_population(fm, o.psi));
        if (next < rec_steps.size() && rec_steps[next] == st + 1) exact.push_back(reduced_state(fm, o.psi)), ++next;
      }
    } else {
      OracleDensity o = oracle_density(fm, sc.rho0);
      std::size_t next = 0;
      if (rec_steps[0] == 0) exact.push_back(reduced_state(fm, o.rho)), ++next;
      for (std::size_t st = 0; st < n; ++st) {
        sme_step(fm, o, path.at(st), &thr, st, cfg.dt, cfg.integrator);
        leak = std::max(leak, top_population(fm, o.rho));
        if (next < rec_steps.size() && rec_steps[next] == st + 1) exact.push_back(reduced_state(fm, o.rho)), ++next;
      }
    }
    if (leak > kLeakageBound)
      throw std::runtime_error("oracle cutoff leakage " + std::to_string(leak) + " exceeds bound; raise oracle.n_max");
    path.jumps = thr.flags();
    TrajOut out;
    out.leak = leak;
    out.td.assign(Q, std::vector<double>(G, 0.0));
    std::size_t q = 0;
    for (const auto& eng : engines) {
      RecordedJumpDriver rj(path);
      HierarchyState s = eng.initial_state(sc.rho0);
      std::size_t next = 0;
      if (rec_steps[0] == 0) out.td[q][next] = trace_distance(s.rho[0], exact[next]), ++next;
      for (std::size_t st = 0; st < n; ++st) {
        eng.step(s, path.at(st), &rj, st, cfg.dt, cfg.integrator);
        s.time = static_cast<double>(st + 1) * cfg.dt;
        if (next < rec_steps.size() && rec_steps[next] == st + 1)
          out.td[q][next] = trace_distance(s.rho[0], exact[next]), ++next;
      }
      ++q;
    }
    const auto& md = sc.model.modes[0];
    if (do_redfield) {
      Mat rho = sc.rho0;
      std::size_t next = 0;
      if (rec_steps[0] == 0) out.td[q][next] = trace_distance(rho, exact[next]), ++next;
      for (std::size_t st = 0; st < n; ++st) {
        const Mat Lbar = red->at(static_cast<double>(st) * cfg.dt);
        rho = conditioned_redfield_step(rho, sc.model.H_A, md.L, Lbar, md.kappa, md.g, cfg.dt, path.real[0][st]);
        if (next < rec_steps.size() && rec_steps[next] == st + 1) out.td[q][next] = trace_distance(rho, exact[next]), ++next;
      }
      ++q;
    }
    if (do_bad) {
      Mat rho = sc.rho0;
      std::size_t next = 0;
      if (rec_steps[0] == 0) out.td[q][next] = trace_distance(rho, exact[next]), ++next;
      for (std::size_t st = 0; st < n; ++st) {
        rho = bad_cavity_step(rho, md.g, md.kappa, md.L, sc.model.H_A, cfg.dt, path.real[0][st],
                              cfg.integrator == Integrator::kraus ? Integrator::kraus : Integrator::euler_maruyama);
        if (next < rec_steps.size() && rec_steps[next] == st + 1) out.td[q][next] = trace_distance(rho, exact[next]), ++next;
      }
      ++q;
    }
    outs[tr] = std::move(out);
  });

  const double Mn = static_cast<double>(trajectories);
  rep.mean.assign(Q, std::vector<double>(G, 0.0));
  rep.se = rep.mean;
  rep.max_distance.assign(Q, 0.0);
  std::vector<std::vector<double>> sum2 = rep.mean;
  for (const auto& o : outs) {
    rep.max_oracle_leakage = std::max(rep.max_oracle_leakage, o.leak);
    for (std::size_t q = 0; q < Q; ++q)
      for (std::size_t g = 0; g < G; ++g) {
        rep.mean[q][g] += o.td[q][g];
        sum2[q][g] += o.td[q][g] * o.td[q][g];
        rep.max_distance[q] = std::max(rep.max_distance[q], o.td[q][g]);
      }
  }
  rep.time_average.assign(Q, 0.0);
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t g = 0; g < G; ++g) {
      const double m = rep.mean[q][g] / Mn;
      rep.mean[q][g] = m;
      if (trajectories > 1) rep.se[q][g] = std::sqrt(std::max(0.0, (sum2[q][g] - Mn * m * m) / (Mn - 1.0)) / Mn);
    }
    // trapezoid over the grid
    double acc = 0.0;
    for (std::size_t g = 1; g < G; ++g) acc += 0.5 * (rep.mean[q][g] + rep.mean[q][g - 1]) * (rep.t[g] - rep.t[g - 1]);
    rep.time_average[q] = G > 1 ? acc / (rep.t.back() - rep.t.front()) : rep.mean[q][0];
  }
  return rep;
}

}  // namespace cheom
