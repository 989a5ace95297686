#include "cheom/engine.hpp"

#include <cmath>
#include <stdexcept>

namespace cheom {

double FeedbackSpec::scheduled(double t) const {
  double v = values.empty() ? 0.0 : values.front();
  for (std::size_t i = 0; i < times.size() && i < values.size(); ++i)
    if (t >= times[i] - 1e-12) v = values[i];
  return v;
}

Integrator integrator_from_string(const std::string& s) {
  if (s == "euler_maruyama") return Integrator::euler_maruyama;
  if (s == "kraus") return Integrator::kraus;
  throw std::invalid_argument("unknown integrator '" + s + "'");
}

std::string to_string(Integrator i) { return i == Integrator::kraus ? "kraus" : "euler_maruyama"; }

void Model::validate() const {
  if (H_A.rows() == 0 || H_A.rows() != H_A.cols()) throw std::invalid_argument("H_A must be square and non-empty");
  if (!is_hermitian(H_A, 1e-10)) throw std::invalid_argument("H_A must be Hermitian");
  if (modes.empty()) throw std::invalid_argument("at least one mode required");
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto& m = modes[k];
    if (m.L.rows() != H_A.rows() || m.L.cols() != H_A.cols())
      throw std::invalid_argument("dimension mismatch between H_A and L of mode " + std::to_string(k));
    if (!(m.kappa > 0.0)) throw std::invalid_argument("mode " + std::to_string(k) + ": kappa must be positive");
  }
  if (feedback) {
    const auto& fb = *feedback;
    if (fb.mode >= modes.size()) throw std::invalid_argument("feedback mode out of range");
    if (modes[fb.mode].detection != Detection::homodyne)
      throw std::invalid_argument("feedback requires a homodyne-monitored mode");
    if (fb.op.rows() != H_A.rows() || !is_hermitian(fb.op, 1e-12))
      throw std::invalid_argument("feedback operator must be Hermitian on the atom space");
    if (fb.times.size() != fb.values.size() || fb.times.empty())
      throw std::invalid_argument("feedback schedule: times and values must be non-empty and of equal length");
    if (fb.dynamic && (fb.dyn_num.rows() != H_A.rows() || fb.dyn_den.rows() != H_A.rows()))
      throw std::invalid_argument("dynamic feedback needs numerator/denominator operators on the atom space");
  }
}

Engine::Engine(Model model, int kmax) : model_(std::move(model)) {
  model_.validate();
  if (kmax < 0) throw std::invalid_argument("kmax must be >= 0");
  for (const auto& m : model_.modes)
    if (m.detection == Detection::photodetect && kmax < 2)
      throw std::invalid_argument("photodetection needs kmax >= 2");
  set_ = std::make_shared<IndexSet>(static_cast<int>(model_.modes.size()), kmax);
  H_ = AtomOp(model_.H_A);
  for (const auto& m : model_.modes) {
    L_.emplace_back(m.L);
    Ld_.emplace_back(Mat(m.L.adjoint()));
  }
  if (model_.feedback) fb_ = AtomOp(model_.feedback->op);
}

HierarchyState Engine::initial_state(const Mat& rho_a) const {
  if (rho_a.rows() != model_.atom_dim()) throw std::invalid_argument("initial state dim mismatch");
  HierarchyState s;
  s.set = set_;
  s.rho.assign(set_->size(), Mat::Zero(rho_a.rows(), rho_a.cols()));
  s.rho[0] = rho_a;
  return s;
}

Hierarchy Engine::drift(const Hierarchy& x) const {
  const auto& s = *set_;
  Hierarchy d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Mat D = -I1 * (H_.lmul(x[i]) - H_.rmul(x[i]));
    cplx decay = 0.0;
    for (std::size_t k = 0; k < model_.modes.size(); ++k) {
      const auto& md = model_.modes[k];
      const int kk = static_cast<int>(k);
      const int nk = s[i].n[k], mk = s[i].m[k];
      decay += md.w() * double(nk) + std::conj(md.w()) * double(mk);
      if (md.g == 0.0) continue;
      const double g2 = md.g * md.g;
      if (nk > 0) D += (g2 * nk) * L_[k].lmul(x[s.minus_n(kk, i)]);
      if (mk > 0) D += (g2 * mk) * Ld_[k].rmul(x[s.minus_m(kk, i)]);
      if (int j = s.plus_n(kk, i); j >= 0) D += Ld_[k].rmul(x[j]) - Ld_[k].lmul(x[j]);
      if (int j = s.plus_m(kk, i); j >= 0) D += L_[k].lmul(x[j]) - L_[k].rmul(x[j]);
    }
    D -= decay * x[i];
    d[i] = std::move(D);
  }
  return d;
}

Hierarchy Engine::averaged_rhs(const Hierarchy& x, double lambda) const {
  Hierarchy d = drift(x);
  if (model_.feedback && lambda != 0.0) {
    Hierarchy f = feedback_increment(x, lambda, 0.0, 1.0);
    axpy(d, 1.0, f);
  }
  return d;
}

namespace {

cplx tr(const Mat& m) { return m.trace(); }

}  // namespace

double Engine::quadrature(const Hierarchy& x, std::size_t k) const {
  if (set_->kmax() < 1) throw std::invalid_argument("first-level auxiliaries required");
  const auto& md = model_.modes.at(k);
  if (md.g == 0.0) return 0.0;
  const int kk = static_cast<int>(k);
  const cplx v = tr(x[set_->plus_n(kk, 0)] - x[set_->plus_m(kk, 0)]) / (I1 * md.g) / tr(x[0]);
  return v.real();
}

cplx Engine::mean_a(const Hierarchy& x, std::size_t k) const {
  if (set_->kmax() < 1) throw std::invalid_argument("first-level auxiliaries required");
  const auto& md = model_.modes.at(k);
  if (md.g == 0.0) return 0.0;
  return tr(x[set_->plus_n(static_cast<int>(k), 0)]) / (I1 * md.g) / tr(x[0]);
}

double Engine::photon_number(const Hierarchy& x, std::size_t k) const {
  const auto& md = model_.modes.at(k);
  if (md.g == 0.0) return 0.0;
  const int kk = static_cast<int>(k);
  const int j1 = set_->plus_n(kk, 0);
  const int j = j1 >= 0 ? set_->plus_m(kk, j1) : -1;
  if (j < 0) throw std::invalid_argument("photon number needs kmax >= 2");
  return (tr(x[j]) / tr(x[0])).real() / (md.g * md.g) - model_.theta;
}

cplx Engine::moment(const Hierarchy& x, const MultiIndex& mi) const {
  const int i = set_->find(mi);
  if (i < 0) throw std::invalid_argument("moment: index not retained");
  cplx c = 1.0;
  for (std::size_t k = 0; k < model_.modes.size(); ++k) {
    const double g = model_.modes[k].g;
    if (g == 0.0 && (mi.n[k] || mi.m[k])) return 0.0;
    c *= std::pow(I1 * g, mi.n[k]) * std::pow(-I1 * g, mi.m[k]);
  }
  return tr(x[i]) / c / tr(x[0]);
}

double Engine::current(const Hierarchy& x, std::size_t k, double dw, double dt) const {
  return std::sqrt(2.0 * model_.modes.at(k).kappa) * quadrature(x, k) + dw / dt;
}

double Engine::correlation_x(const Hierarchy& x, std::size_t k, const Mat& op) const {
  const auto& md = model_.modes.at(k);
  if (md.g == 0.0) return 0.0;
  const int kk = static_cast<int>(k);
  const cplx v = tr(op * (x[set_->plus_n(kk, 0)] - x[set_->plus_m(kk, 0)])) / (I1 * md.g) / tr(x[0]);
  return v.real();
}

Hierarchy Engine::homodyne_term(const Hierarchy& x, const StepNoise& noise) const {
  const auto& s = *set_;
  Hierarchy out = zeros_like(x);
  for (std::size_t k = 0; k < model_.modes.size(); ++k) {
    const auto& md = model_.modes[k];
    if (md.detection != Detection::homodyne || md.g == 0.0) continue;
    const double dw = noise.dw.at(k).real();
    if (dw == 0.0) continue;
    const int kk = static_cast<int>(k);
    const double s2k = std::sqrt(2.0 * md.kappa);
    const double ex = quadrature(x, k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      Mat t = (-s2k * ex) * x[i];
      if (int j = s.plus_m(kk, i); j >= 0) t += (I1 / md.g * s2k) * x[j];
      if (int j = s.plus_n(kk, i); j >= 0) t -= (I1 / md.g * s2k) * x[j];
      out[i] += dw * t;
    }
  }
  return out;
}

Hierarchy Engine::heterodyne_term(const Hierarchy& x, const StepNoise& noise) const {
  const auto& s = *set_;
  Hierarchy out = zeros_like(x);
  for (std::size_t k = 0; k < model_.modes.size(); ++k) {
    const auto& md = model_.modes[k];
    if (md.detection != Detection::heterodyne || md.g == 0.0) continue;
    const cplx dw = noise.dw.at(k);
    if (dw == 0.0) continue;
    const int kk = static_cast<int>(k);
    const double s2k = std::sqrt(2.0 * md.kappa);
    const cplx ea = mean_a(x, k);
    const cplx lin = -ea * dw - std::conj(ea) * std::conj(dw);
    for (std::size_t i = 0; i < x.size(); ++i) {
      Mat t = lin * x[i];
      if (int j = s.plus_n(kk, i); j >= 0) t -= (I1 / md.g * dw) * x[j];
      if (int j = s.plus_m(kk, i); j >= 0) t += (I1 / md.g * std::conj(dw)) * x[j];
      out[i] += s2k * t;
    }
  }
  return out;
}

Hierarchy Engine::feedback_increment(const Hierarchy& x, double lambda, double dw, double dt) const {
  Hierarchy out = zeros_like(x);
  if (!model_.feedback || lambda == 0.0) return out;
  const auto& fb = *model_.feedback;
  const auto& md = model_.modes[fb.mode];
  const auto& s = *set_;
  const int kk = static_cast<int>(fb.mode);
  const double s2k = std::sqrt(2.0 * md.kappa);
  auto comm = [&](const Mat& m) -> Mat { return lambda * (fb_.lmul(m) - fb_.rmul(m)); };  // [F, m]
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Mat c = comm(x[i]);
    // F x F - {F^2, x}/2 = -[F, [F, x]]/2
    Mat t = -0.5 * comm(c);
    if (md.g != 0.0) {
      const int jn = s.plus_n(kk, i), jm = s.plus_m(kk, i);
      if (jn >= 0 || jm >= 0) {
        Mat nb = Mat::Zero(x[i].rows(), x[i].cols());
        if (jm >= 0) nb += x[jm];
        if (jn >= 0) nb -= x[jn];
        t += (s2k / md.g) * comm(nb);
      }
    }
    out[i] = dt * t - (I1 * dw) * c;
  }
  return out;
}

double Engine::dynamic_lambda(const Hierarchy& x) const {
  if (!model_.feedback || !model_.feedback->dynamic) throw std::logic_error("dynamic_lambda: no dynamic feedback configured");
  const auto& fb = *model_.feedback;
  const double kappa = model_.modes[fb.mode].kappa;
  const cplx t0 = tr(x[0]);
  const double den = (tr(fb.dyn_den * x[0]) / t0).real();
  if (std::abs(den) < 1e-9) throw std::domain_error("feedback singular");
  double num = correlation_x(x, fb.mode, fb.dyn_num);
  if (fb.centered) num -= (tr(fb.dyn_num * x[0]) / t0).real() * quadrature(x, fb.mode);
  return 2.0 * kappa * num / den;
}

double Engine::lambda_now(HierarchyState& st) const {
  if (!model_.feedback) return 0.0;
  const auto& fb = *model_.feedback;
  if (!fb.dynamic) return fb.scheduled(st.time);
  try {
    st.last_lambda = dynamic_lambda(st.rho);
  } catch (const std::domain_error&) {
    if (!fb.hold_on_singular) throw;
  }
  return st.last_lambda;
}

void Engine::apply_jump(Hierarchy& x, std::size_t k) const {
  const auto& s = *set_;
  const auto& md = model_.modes[k];
  const int kk = static_cast<int>(k);
  const int j0 = s.plus_m(kk, s.plus_n(kk, 0));
  const double norm = tr(x[j0]).real();  // g^2 tr(a rho a†)
  if (norm < 1e-12 * md.g * md.g * tr(x[0]).real()) throw std::runtime_error("jump from empty mode");
  Hierarchy y = zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int j1 = s.plus_n(kk, i);
    const int j = j1 >= 0 ? s.plus_m(kk, j1) : -1;
    if (j >= 0) y[i] = x[j] / norm;
  }
  x = std::move(y);
}

void Engine::renormalize(Hierarchy& x) {
  const double t = x[0].trace().real();
  for (auto& m : x) m /= t;
}

void Engine::check_trace(const Hierarchy& x) const {
  const double t = x[0].trace().real();
  if (!(t >= 0.5) || !std::isfinite(t)) throw std::runtime_error("integration diverged: reduce dt or raise k_max");
}

StepInfo Engine::step(HierarchyState& s, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index,
                      double dt, Integrator integ) const {
  return integ == Integrator::kraus ? step_kraus(s, noise, jumps, step_index, dt)
                                    : step_ito(s, noise, jumps, step_index, dt);
}

StepInfo Engine::step_ito(HierarchyState& st, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index,
                          double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto& s = *set_;
  const std::size_t M = model_.modes.size();
  if (noise.dw.size() != M) throw std::invalid_argument("step: one increment per mode required");
  Hierarchy& x = st.rho;
  StepInfo info;
  info.jumped.assign(M, 0);
  info.current.assign(M, 0.0);
  info.lambda = lambda_now(st);

  std::vector<double> rate(M, 0.0);
  for (std::size_t k = 0; k < M; ++k) {
    const auto& md = model_.modes[k];
    if (md.detection == Detection::homodyne) info.current[k] = current(x, k, noise.dw[k].real(), dt);
    if (md.detection == Detection::heterodyne)
      info.current[k] = std::sqrt(2.0 * md.kappa) * std::conj(mean_a(x, k)) + noise.dw[k] / dt;
    if (md.detection == Detection::photodetect) rate[k] = 2.0 * md.kappa * photon_number(x, k);
  }

  Hierarchy inc = drift(x);
  scale(inc, dt);
  for (std::size_t k = 0; k < M; ++k) {
    const auto& md = model_.modes[k];
    if (md.detection != Detection::photodetect || md.g == 0.0) continue;
    const int kk = static_cast<int>(k);
    const double n = photon_number(x, k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      Mat t = (2.0 * md.kappa * n) * x[i];
      const int j1 = s.plus_n(kk, i);
      const int j = j1 >= 0 ? s.plus_m(kk, j1) : -1;
      if (j >= 0) t -= (2.0 * md.kappa / (md.g * md.g)) * x[j];
      inc[i] += dt * t;
    }
  }
  axpy(inc, 1.0, homodyne_term(x, noise));
  axpy(inc, 1.0, heterodyne_term(x, noise));
  if (model_.feedback && info.lambda != 0.0)
    axpy(inc, 1.0, feedback_increment(x, info.lambda, noise.dw[model_.feedback->mode].real(), dt));
  axpy(x, 1.0, inc);

  for (std::size_t k = 0; k < M; ++k) {
    if (model_.modes[k].detection != Detection::photodetect) continue;
    if (jumps && jumps->decide(k, rate[k], dt, step_index)) {
      apply_jump(x, k);
      info.jumped[k] = 1;
    }
  }
  check_trace(x);
  renormalize(x);
  st.time += dt;
  return info;
}

Hierarchy Engine::left_A(const Hierarchy& x) const {
  const auto& s = *set_;
  Hierarchy y = left_atom(H_, x);
  scale(y, -I1);
  for (std::size_t k = 0; k < model_.modes.size(); ++k) {
    const auto& md = model_.modes[k];
    if (md.g == 0.0) continue;
    const int kk = static_cast<int>(k);
    const Hierarchy ax = left_a(s, x, kk, md.g);
    const Hierarchy adx = left_adag(s, x, kk, md.g);
    axpy(y, -md.w(), left_adag(s, ax, kk, md.g));
    axpy(y, -I1 * md.g, left_atom(L_[k], adx));
    axpy(y, -I1 * md.g, left_atom(Ld_[k], ax));
  }
  return y;
}

Hierarchy Engine::right_Adag(const Hierarchy& x) const {
  const auto& s = *set_;
  Hierarchy y = right_atom(H_, x);
  scale(y, I1);
  for (std::size_t k = 0; k < model_.modes.size(); ++k) {
    const auto& md = model_.modes[k];
    if (md.g == 0.0) continue;
    const int kk = static_cast<int>(k);
    const Hierarchy xa = right_a(s, x, kk, md.g);
    const Hierarchy xad = right_adag(s, x, kk, md.g);
    axpy(y, -std::conj(md.w()), right_a(s, xad, kk, md.g));
    axpy(y, I1 * md.g, right_atom(L_[k], xad));
    axpy(y, I1 * md.g, right_atom(Ld_[k], xa));
  }
  return y;
}

StepInfo Engine::step_kraus(HierarchyState& st, const StepNoise& noise, JumpDriver* jumps, std::size_t step_index,
                            double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto& s = *set_;
  const std::size_t M = model_.modes.size();
  if (noise.dw.size() != M) throw std::invalid_argument("step: one increment per mode required");
  Hierarchy& x = st.rho;
  StepInfo info;
  info.jumped.assign(M, 0);
  info.current.assign(M, 0.0);
  info.lambda = lambda_now(st);

  // measured record increments dY and Ito corrections E
  std::vector<cplx> dy(M, 0.0);
  std::vector<double> ecorr(M, 0.0), rate(M, 0.0), s2k(M, 0.0);
  std::vector<std::size_t> mon;
  for (std::size_t k = 0; k < M; ++k) {
    const auto& md = model_.modes[k];
    s2k[k] = std::sqrt(2.0 * md.kappa);
    if (md.detection == Detection::homodyne) {
      dy[k] = noise.dw[k].real() + s2k[k] * quadrature(x, k) * dt;
      ecorr[k] = 1.0;
      mon.push_back(k);
    } else if (md.detection == Detection::heterodyne) {
      dy[k] = noise.dw[k] + s2k[k] * std::conj(mean_a(x, k)) * dt;
      mon.push_back(k);
    } else if (md.detection == Detection::photodetect) {
      rate[k] = 2.0 * md.kappa * photon_number(x, k);
    }
    if (md.detection == Detection::homodyne || md.detection == Detection::heterodyne) {
      info.current[k] = md.detection == Detection::homodyne ? cplx(dy[k].real() / dt) : dy[k] / dt;
    }
  }

  // Y = M x
  Hierarchy y = x;
  axpy(y, dt, left_A(x));
  std::vector<Hierarchy> cx(M);
  for (auto k : mon) {
    if (model_.modes[k].g == 0.0) continue;
    cx[k] = left_a(s, x, static_cast<int>(k), model_.modes[k].g);
    scale(cx[k], s2k[k]);
    axpy(y, dy[k], cx[k]);
  }
  for (auto l : mon) {
    if (model_.modes[l].g == 0.0) continue;
    for (auto k : mon) {
      if (model_.modes[k].g == 0.0) continue;
      const cplx coef = 0.5 * (dy[k] * dy[l] - (k == l ? ecorr[k] * dt : 0.0));
      Hierarchy ccx = left_a(s, cx[l], static_cast<int>(k), model_.modes[k].g);
      axpy(y, coef * s2k[k], ccx);
    }
  }
  // Z = Y M†
  Hierarchy z = y;
  axpy(z, dt, right_Adag(y));
  std::vector<Hierarchy> yc(M);
  for (auto k : mon) {
    if (model_.modes[k].g == 0.0) continue;
    yc[k] = right_adag(s, y, static_cast<int>(k), model_.modes[k].g);
    scale(yc[k], s2k[k]);
    axpy(z, std::conj(dy[k]), yc[k]);
  }
  for (auto l : mon) {
    if (model_.modes[l].g == 0.0) continue;
    for (auto k : mon) {
      if (model_.modes[k].g == 0.0) continue;
      const cplx coef = 0.5 * std::conj(dy[k] * dy[l] - (k == l ? ecorr[k] * dt : 0.0));
      Hierarchy ycc = right_adag(s, yc[l], static_cast<int>(k), model_.modes[k].g);
      axpy(z, coef * s2k[k], ycc);
    }
  }
  // unmonitored loss channels
  for (std::size_t k = 0; k < M; ++k) {
    const auto& md = model_.modes[k];
    if (md.detection != Detection::unmonitored || md.g == 0.0) continue;
    const int kk = static_cast<int>(k);
    const double c = 2.0 * md.kappa * dt / (md.g * md.g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int j1 = s.plus_n(kk, i);
      const int j = j1 >= 0 ? s.plus_m(kk, j1) : -1;
      if (j >= 0) z[i] += c * x[j];
    }
  }
  // left-then-right truncation is not adjoint symmetric; average with the mirrored order
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::size_t j = static_cast<std::size_t>(s.adjoint(i));
    if (j < i) continue;
    if (j == i) {
      z[i] = 0.5 * (z[i] + z[i].adjoint()).eval();
    } else {
      const Mat zi = 0.5 * (z[i] + z[j].adjoint());
      z[j] = zi.adjoint();
      z[i] = zi;
    }
  }
  if (model_.feedback && info.lambda != 0.0) {
    const auto fbm = model_.feedback->mode;
    const Mat U = expm_hermitian(model_.feedback->op, -I1 * info.lambda * dy[fbm].real());
    const Mat Ud = U.adjoint();
    for (auto& m : z) m = U * m * Ud;
  }
  x = std::move(z);
  for (std::size_t k = 0; k < M; ++k) {
    if (model_.modes[k].detection != Detection::photodetect) continue;
    if (jumps && jumps->decide(k, rate[k], dt, step_index)) {
      apply_jump(x, k);
      info.jumped[k] = 1;
    }
  }
  check_trace(x);
  renormalize(x);
  st.time += dt;
  return info;
}

Hierarchy Engine::stratonovich_f(const Hierarchy& x) const {
  const auto& s = *set_;
  const auto& md = model_.modes[0];
  Hierarchy f = drift(x);
  if (md.g == 0.0) return f;
  const double g2 = md.g * md.g;
  auto at = [&](std::size_t i, int dn, int dm) {
    int j = static_cast<int>(i);
    for (int r = 0; r < dn && j >= 0; ++r) j = s.plus_n(0, j);
    for (int r = 0; r < dm && j >= 0; ++r) j = s.plus_m(0, j);
    return j;
  };
  const cplx t0 = tr(x[0]);
  const double n = (tr(x[at(0, 1, 1)]) / t0).real() / g2;
  const cplx a2 = -tr(x[at(0, 2, 0)]) / t0 / g2;
  const cplx ad2 = -tr(x[at(0, 0, 2)]) / t0 / g2;
  const double re2n = md.kappa * (2.0 * n + (a2 + ad2).real());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (int j = at(i, 2, 0); j >= 0) f[i] += (md.kappa / g2) * x[j];
    if (int j = at(i, 0, 2); j >= 0) f[i] += (md.kappa / g2) * x[j];
    if (int j = at(i, 1, 1); j >= 0) f[i] -= (2.0 * md.kappa / g2) * x[j];
    f[i] += re2n * x[i];
  }
  return f;
}

Hierarchy Engine::stratonovich_g(const Hierarchy& x) const {
  const auto& s = *set_;
  const auto& md = model_.modes[0];
  Hierarchy gx = zeros_like(x);
  if (md.g == 0.0) return gx;
  const double s2k = std::sqrt(2.0 * md.kappa);
  const double ex = quadrature(x, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    gx[i] = (-s2k * ex) * x[i];
    if (int j = s.plus_m(0, i); j >= 0) gx[i] += (I1 / md.g * s2k) * x[j];
    if (int j = s.plus_n(0, i); j >= 0) gx[i] -= (I1 / md.g * s2k) * x[j];
  }
  return gx;
}

void Engine::step_stratonovich(HierarchyState& st, double current, double dt) const {
  if (model_.modes.size() != 1) throw std::invalid_argument("Stratonovich path implemented single-mode only");
  if (model_.modes[0].detection != Detection::homodyne)
    throw std::invalid_argument("Stratonovich path needs a homodyne mode");
  if (set_->kmax() < 2) throw std::invalid_argument("Stratonovich path needs kmax >= 2");
  const double dy = current * dt;
  Hierarchy& x = st.rho;
  const Hierarchy f0 = stratonovich_f(x);
  const Hierarchy g0 = stratonovich_g(x);
  Hierarchy pred = x;
  axpy(pred, dt, f0);
  axpy(pred, dy, g0);
  const Hierarchy f1 = stratonovich_f(pred);
  const Hierarchy g1 = stratonovich_g(pred);
  axpy(x, 0.5 * dt, f0);
  axpy(x, 0.5 * dt, f1);
  axpy(x, 0.5 * dy, g0);
  axpy(x, 0.5 * dy, g1);
  check_trace(x);
  renormalize(x);
  st.time += dt;
}

void Engine::step_averaged(HierarchyState& st, double dt) const {
  if (model_.feedback && model_.feedback->dynamic)
    throw std::invalid_argument("dynamic-lambda feedback has no averaged form; use a schedule");
  const double t = st.time;
  auto lam = [&](double tt) { return model_.feedback ? model_.feedback->scheduled(tt) : 0.0; };
  Hierarchy& x = st.rho;
  const Hierarchy k1 = averaged_rhs(x, lam(t));
  Hierarchy tmp = x;
  axpy(tmp, 0.5 * dt, k1);
  const Hierarchy k2 = averaged_rhs(tmp, lam(t + 0.5 * dt));
  tmp = x;
  axpy(tmp, 0.5 * dt, k2);
  const Hierarchy k3 = averaged_rhs(tmp, lam(t + 0.5 * dt));
  tmp = x;
  axpy(tmp, dt, k3);
  const Hierarchy k4 = averaged_rhs(tmp, lam(t + dt));
  axpy(x, dt / 6.0, k1);
  axpy(x, dt / 3.0, k2);
  axpy(x, dt / 3.0, k3);
  axpy(x, dt / 6.0, k4);
  check_trace(x);
  renormalize(x);
  st.time += dt;
}

}  // namespace cheom
