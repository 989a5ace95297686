#include "cheom/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace cheom {

FullModel build_full_model(const Model& m, const std::vector<int>& n_max) {
  m.validate();
  if (n_max.size() != m.modes.size()) throw std::invalid_argument("oracle: one n_max per mode required");
  FullModel fm;
  std::vector<Layout::Factor> f{{"atom", m.atom_dim()}};
  for (std::size_t k = 0; k < n_max.size(); ++k) {
    if (n_max[k] < 1) throw std::invalid_argument("oracle: n_max must be >= 1");
    f.push_back({"mode" + std::to_string(k), n_max[k] + 1});
  }
  fm.layout = Layout(f);
  fm.atom_dim = m.atom_dim();
  fm.n_max = n_max;
  fm.H = embed_sparse(m.H_A, fm.layout, "atom");
  for (std::size_t k = 0; k < m.modes.size(); ++k) {
    const auto& md = m.modes[k];
    const std::string lab = "mode" + std::to_string(k);
    SpMat a = embed_sparse(annihilation_op(n_max[k] + 1), fm.layout, lab);
    SpMat ad = a.adjoint();
    SpMat L = embed_sparse(md.L, fm.layout, "atom");
    SpMat Ld = L.adjoint();
    fm.H += md.delta * SpMat(ad * a) + md.g * SpMat(L * ad + Ld * a);
    fm.a.push_back(a);
    fm.kappa.push_back(md.kappa);
    fm.detection.push_back(md.detection);
  }
  const auto dims = fm.layout.dims();
  const int n = fm.layout.total_dim();
  fm.top_level.resize(m.modes.size());
  for (int i = 0; i < n; ++i) {
    int r = i;
    for (int f2 = static_cast<int>(dims.size()) - 1; f2 >= 1; --f2) {
      if (r % dims[f2] == n_max[f2 - 1]) fm.top_level[f2 - 1].push_back(i);
      r /= dims[f2];
    }
  }
  fm.feedback = m.feedback;
  if (m.feedback && m.feedback->dynamic) {
    fm.fb_num = embed_sparse(m.feedback->dyn_num, fm.layout, "atom");
    fm.fb_den = embed_sparse(m.feedback->dyn_den, fm.layout, "atom");
  }
  return fm;
}

OracleVector oracle_vector(const FullModel& fm, const Vec& atom_psi) {
  if (atom_psi.size() != fm.atom_dim) throw std::invalid_argument("oracle: atom state dim mismatch");
  OracleVector s;
  s.psi = Vec::Zero(fm.layout.total_dim());
  const int rest = fm.layout.total_dim() / fm.atom_dim;
  for (int i = 0; i < fm.atom_dim; ++i) s.psi(i * rest) = atom_psi(i);
  s.psi.normalize();
  return s;
}

OracleDensity oracle_density(const FullModel& fm, const Mat& atom_rho) {
  if (atom_rho.rows() != fm.atom_dim) throw std::invalid_argument("oracle: atom state dim mismatch");
  OracleDensity s;
  const int n = fm.layout.total_dim();
  const int rest = n / fm.atom_dim;
  s.rho = Mat::Zero(n, n);
  for (int i = 0; i < fm.atom_dim; ++i)
    for (int j = 0; j < fm.atom_dim; ++j) s.rho(i * rest, j * rest) = atom_rho(i, j);
  return s;
}

cplx oracle_expect(const SpMat& op, const Vec& psi) { return psi.dot(op * psi) / psi.squaredNorm(); }

cplx oracle_expect(const SpMat& op, const Mat& rho) { return Mat(op * rho).trace() / rho.trace(); }

double oracle_quadrature(const FullModel& fm, const Vec& psi, std::size_t k) {
  return 2.0 * oracle_expect(fm.a.at(k), psi).real();
}

double oracle_quadrature(const FullModel& fm, const Mat& rho, std::size_t k) {
  return 2.0 * oracle_expect(fm.a.at(k), rho).real();
}

double top_population(const FullModel& fm, const Vec& psi) {
  double worst = 0.0;
  const double nrm = psi.squaredNorm();
  for (const auto& idx : fm.top_level) {
    double p = 0.0;
    for (int i : idx) p += std::norm(psi(i));
    worst = std::max(worst, p / nrm);
  }
  return worst;
}

double top_population(const FullModel& fm, const Mat& rho) {
  double worst = 0.0;
  const double t = rho.trace().real();
  for (const auto& idx : fm.top_level) {
    double p = 0.0;
    for (int i : idx) p += rho(i, i).real();
    worst = std::max(worst, p / t);
  }
  return worst;
}

Mat reduced_state(const FullModel& fm, const Vec& psi) {
  const int rest = fm.layout.total_dim() / fm.atom_dim;
  Eigen::Map<const Eigen::MatrixXcd> m(psi.data(), rest, fm.atom_dim);  // column i = atom index i
  Mat r = m.transpose() * m.conjugate();
  return r / r.trace().real();
}

Mat reduced_state(const FullModel& fm, const Mat& rho) {
  const int rest = fm.layout.total_dim() / fm.atom_dim;
  Mat r = Mat::Zero(fm.atom_dim, fm.atom_dim);
  for (int i = 0; i < fm.atom_dim; ++i)
    for (int j = 0; j < fm.atom_dim; ++j) r(i, j) = rho.block(i * rest, j * rest, rest, rest).trace();
  return r / r.trace().real();
}

namespace {

double lambda_for(const FullModel& fm, double time, double& last, double ex, cplx num_x, cplx num, cplx den) {
  if (!fm.feedback) return 0.0;
  const auto& fb = *fm.feedback;
  if (!fb.dynamic) return fb.scheduled(time);
  if (std::abs(den.real()) >= 1e-9) {
    double nx = num_x.real();
    if (fb.centered) nx -= num.real() * ex;
    last = 2.0 * fm.kappa[fb.mode] * nx / den.real();
  } else if (!fb.hold_on_singular) {
    throw std::domain_error("feedback singular");
  }
  return last;
}

double lambda_vec(const FullModel& fm, OracleVector& s) {
  if (!fm.feedback) return 0.0;
  if (!fm.feedback->dynamic) return fm.feedback->scheduled(s.time);
  const auto k = fm.feedback->mode;
  const SpMat X = fm.a[k] + SpMat(fm.a[k].adjoint());
  return lambda_for(fm, s.time, s.last_lambda, oracle_quadrature(fm, s.psi, k),
                    oracle_expect(SpMat(fm.fb_num * X), s.psi), oracle_expect(fm.fb_num, s.psi),
                    oracle_expect(fm.fb_den, s.psi));
}

double lambda_mat(const FullModel& fm, OracleDensity& s) {
  if (!fm.feedback) return 0.0;
  if (!fm.feedback->dynamic) return fm.feedback->scheduled(s.time);
  const auto k = fm.feedback->mode;
  const SpMat X = fm.a[k] + SpMat(fm.a[k].adjoint());
  return lambda_for(fm, s.time, s.last_lambda, oracle_quadrature(fm, s.rho, k),
                    oracle_expect(SpMat(fm.fb_num * X), s.rho), oracle_expect(fm.fb_num, s.rho),
                    oracle_expect(fm.fb_den, s.rho));
}

SpMat feedback_unitary(const FullModel& fm, double lambda, double dy) {
  const Mat U = expm_hermitian(fm.feedback->op, -I1 * lambda * dy);
  return embed_sparse(U, fm.layout, "atom");
}

SpMat feedback_full(const FullModel& fm, double lambda) {
  return embed_sparse(Mat(lambda * fm.feedback->op), fm.layout, "atom");
}

// Non-Hermitian generator A = -iH - sum kappa a†a.
template <typename T>
T apply_A(const FullModel& fm, const T& x) {
  T y = (-I1) * (fm.H * x);
  for (std::size_t k = 0; k < fm.a.size(); ++k) y -= fm.kappa[k] * (fm.a[k].adjoint() * (fm.a[k] * x));
  return y;
}

void check_norm(double n) {
  if (!(n >= 0.5) || !std::isfinite(n)) throw std::runtime_error("integration diverged: reduce dt");
}

}  // namespace

StepInfo sse_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, JumpDriver* jumps,
                  std::size_t step_index, double dt, Integrator integ) {
  const std::size_t M = fm.a.size();
  if (noise.dw.size() != M) throw std::invalid_argument("oracle step: one increment per mode required");
  for (auto d : fm.detection)
    if (d == Detection::unmonitored) throw std::invalid_argument("SSE oracle cannot represent unmonitored modes");
  StepInfo info;
  info.jumped.assign(M, 0);
  info.current.assign(M, 0.0);
  info.lambda = lambda_vec(fm, s);
  const Vec& psi = s.psi;
  std::vector<cplx> ea(M), dy(M, 0.0);
  std::vector<double> rate(M, 0.0), s2k(M);
  for (std::size_t k = 0; k < M; ++k) {
    s2k[k] = std::sqrt(2.0 * fm.kappa[k]);
    ea[k] = oracle_expect(fm.a[k], psi);
    if (fm.detection[k] == Detection::homodyne) dy[k] = noise.dw[k].real() + s2k[k] * 2.0 * ea[k].real() * dt;
    if (fm.detection[k] == Detection::heterodyne) dy[k] = noise.dw[k] + s2k[k] * std::conj(ea[k]) * dt;
    if (fm.detection[k] == Detection::photodetect)
      rate[k] = 2.0 * fm.kappa[k] * oracle_expect(SpMat(fm.a[k].adjoint() * fm.a[k]), psi).real();
    if (fm.detection[k] == Detection::homodyne) info.current[k] = dy[k].real() / dt;
    if (fm.detection[k] == Detection::heterodyne) info.current[k] = dy[k] / dt;
  }
  Vec next;
  if (integ == Integrator::kraus) {
    next = psi + dt * apply_A(fm, psi);
    std::vector<Vec> cpsi(M);
    for (std::size_t k = 0; k < M; ++k) {
      if (fm.detection[k] != Detection::homodyne && fm.detection[k] != Detection::heterodyne) continue;
      cpsi[k] = s2k[k] * (fm.a[k] * psi);
      next += dy[k] * cpsi[k];
    }
    for (std::size_t l = 0; l < M; ++l) {
      if (cpsi[l].size() == 0) continue;
      for (std::size_t k = 0; k < M; ++k) {
        if (cpsi[k].size() == 0) continue;
        const double e = (k == l && fm.detection[k] == Detection::homodyne) ? dt : 0.0;
        next += (0.5 * (dy[k] * dy[l] - e) * s2k[k]) * (fm.a[k] * cpsi[l]);
      }
    }
  } else {
    if (fm.feedback && info.lambda != 0.0)
      throw std::invalid_argument("oracle feedback requires the kraus integrator");
    Vec d = apply_A(fm, psi) * dt;
    for (std::size_t k = 0; k < M; ++k) {
      const Vec apsi = fm.a[k] * psi;
      const double kap = fm.kappa[k];
      switch (fm.detection[k]) {
        case Detection::homodyne: {
          const double ex = 2.0 * ea[k].real();
          d += dt * (kap * ex * apsi - (kap * ex * ex / 4.0) * psi);
          d += noise.dw[k].real() * s2k[k] * (apsi - 0.5 * ex * psi);
          break;
        }
        case Detection::heterodyne:
          d += dt * (2.0 * kap * std::conj(ea[k]) * apsi - kap * std::norm(ea[k]) * psi);
          d += noise.dw[k] * s2k[k] * (apsi - ea[k] * psi);
          break;
        case Detection::photodetect: d += (dt * 0.5 * rate[k]) * psi; break;
        case Detection::unmonitored: break;
      }
    }
    next = psi + d;
  }
  if (fm.feedback && info.lambda != 0.0) next = feedback_unitary(fm, info.lambda, dy[fm.feedback->mode].real()) * next;
  check_norm(next.squaredNorm());
  for (std::size_t k = 0; k < M; ++k) {
    if (fm.detection[k] != Detection::photodetect || !jumps) continue;
    if (jumps->decide(k, rate[k], dt, step_index)) {
      if (rate[k] < 2.0 * fm.kappa[k] * 1e-12) throw std::runtime_error("jump from empty mode");
      next = fm.a[k] * next;
      next /= next.norm();
      info.jumped[k] = 1;
    }
  }
  const double n = next.norm();
  s.psi = next / n;
  s.time += dt;
  if (top_population(fm, s.psi) > kLeakageBound) s.leakage = true;
  return info;
}

StepInfo sme_step(const FullModel& fm, OracleDensity& s, const StepNoise& noise, JumpDriver* jumps,
                  std::size_t step_index, double dt, Integrator integ) {
  const std::size_t M = fm.a.size();
  if (noise.dw.size() != M) throw std::invalid_argument("oracle step: one increment per mode required");
  StepInfo info;
  info.jumped.assign(M, 0);
  info.current.assign(M, 0.0);
  info.lambda = lambda_mat(fm, s);
  const Mat& rho = s.rho;
  std::vector<cplx> ea(M), dy(M, 0.0);
  std::vector<double> rate(M, 0.0), s2k(M);
  for (std::size_t k = 0; k < M; ++k) {
    s2k[k] = std::sqrt(2.0 * fm.kappa[k]);
    ea[k] = oracle_expect(fm.a[k], rho);
    if (fm.detection[k] == Detection::homodyne) dy[k] = noise.dw[k].real() + s2k[k] * 2.0 * ea[k].real() * dt;
    if (fm.detection[k] == Detection::heterodyne) dy[k] = noise.dw[k] + s2k[k] * std::conj(ea[k]) * dt;
    if (fm.detection[k] == Detection::photodetect)
      rate[k] = 2.0 * fm.kappa[k] * oracle_expect(SpMat(fm.a[k].adjoint() * fm.a[k]), rho).real();
    if (fm.detection[k] == Detection::homodyne) info.current[k] = dy[k].real() / dt;
    if (fm.detection[k] == Detection::heterodyne) info.current[k] = dy[k] / dt;
  }
  Mat next;
  if (integ == Integrator::kraus) {
    Mat y = rho + dt * apply_A(fm, rho);
    std::vector<Mat> cr(M);
    for (std::size_t k = 0; k < M; ++k) {
      if (fm.detection[k] != Detection::homodyne && fm.detection[k] != Detection::heterodyne) continue;
      cr[k] = s2k[k] * (fm.a[k] * rho);
      y += dy[k] * cr[k];
    }
    for (std::size_t l = 0; l < M; ++l) {
      if (cr[l].size() == 0) continue;
      for (std::size_t k = 0; k < M; ++k) {
        if (cr[k].size() == 0) continue;
        const double e = (k == l && fm.detection[k] == Detection::homodyne) ? dt : 0.0;
        y += (0.5 * (dy[k] * dy[l] - e) * s2k[k]) * (fm.a[k] * cr[l]);
      }
    }
    // right multiplication by M† equals the adjoint of M applied to y†
    Mat yd = y.adjoint();
    Mat z = yd + dt * apply_A(fm, yd);
    std::vector<Mat> cy(M);
    for (std::size_t k = 0; k < M; ++k) {
      if (cr[k].size() == 0) continue;
      cy[k] = s2k[k] * (fm.a[k] * yd);
      z += dy[k] * cy[k];
    }
    for (std::size_t l = 0; l < M; ++l) {
      if (cy[l].size() == 0) continue;
      for (std::size_t k = 0; k < M; ++k) {
        if (cy[k].size() == 0) continue;
        const double e = (k == l && fm.detection[k] == Detection::homodyne) ? dt : 0.0;
        z += (0.5 * (dy[k] * dy[l] - e) * s2k[k]) * (fm.a[k] * cy[l]);
      }
    }
    next = z.adjoint();
    for (std::size_t k = 0; k < M; ++k)
      if (fm.detection[k] == Detection::unmonitored) {
        const Mat ar = fm.a[k] * rho;
        next += (2.0 * fm.kappa[k] * dt) * Mat(ar * SpMat(fm.a[k].adjoint()));
      }
  } else {
    if (fm.feedback && info.lambda != 0.0)
      throw std::invalid_argument("oracle feedback requires the kraus integrator");
    Mat d = -I1 * (Mat(fm.H * rho) - Mat(rho * fm.H));
    for (std::size_t k = 0; k < M; ++k) {
      const SpMat& a = fm.a[k];
      const SpMat ad = a.adjoint();
      const Mat ar = a * rho;
      const Mat ra = rho * ad;
      const Mat ara = ar * ad;
      const SpMat n = ad * a;
      const double kap = fm.kappa[k];
      if (fm.detection[k] == Detection::photodetect) {
        d += -kap * (Mat(n * rho) + Mat(rho * n)) + rate[k] * rho;
      } else {
        d += 2.0 * kap * ara - kap * (Mat(n * rho) + Mat(rho * n));
      }
      if (fm.detection[k] == Detection::homodyne) d += (noise.dw[k].real() / dt) * s2k[k] * (ar + ra - 2.0 * ea[k].real() * rho);
      if (fm.detection[k] == Detection::heterodyne)
        d += (s2k[k] / dt) * (noise.dw[k] * (ar - ea[k] * rho) + std::conj(noise.dw[k]) * (ra - std::conj(ea[k]) * rho));
    }
    next = rho + dt * d;
  }
  if (fm.feedback && info.lambda != 0.0) {
    const SpMat U = feedback_unitary(fm, info.lambda, dy[fm.feedback->mode].real());
    next = Mat(U * next) * SpMat(U.adjoint());
  }
  check_norm(next.trace().real());
  for (std::size_t k = 0; k < M; ++k) {
    if (fm.detection[k] != Detection::photodetect || !jumps) continue;
    if (jumps->decide(k, rate[k], dt, step_index)) {
      if (rate[k] < 2.0 * fm.kappa[k] * 1e-12) throw std::runtime_error("jump from empty mode");
      next = Mat(fm.a[k] * next) * SpMat(fm.a[k].adjoint());
      next /= next.trace().real();
      info.jumped[k] = 1;
    }
  }
  const double t = next.trace().real();
  s.rho = next / t;
  s.time += dt;
  if (top_population(fm, s.rho) > kLeakageBound) s.leakage = true;
  return info;
}

StepInfo sse_homodyne_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, double dt, Integrator integ) {
  return sse_step(fm, s, noise, nullptr, 0, dt, integ);
}

StepInfo sme_homodyne_step(const FullModel& fm, OracleDensity& s, const StepNoise& noise, double dt,
                           Integrator integ) {
  return sme_step(fm, s, noise, nullptr, 0, dt, integ);
}

StepInfo sse_heterodyne_step(const FullModel& fm, OracleVector& s, const StepNoise& noise, double dt,
                             Integrator integ) {
  return sse_step(fm, s, noise, nullptr, 0, dt, integ);
}

StepInfo sse_jump_step(const FullModel& fm, OracleVector& s, JumpDriver& jumps, std::size_t step_index, double dt) {
  StepNoise none;
  none.dw.assign(fm.a.size(), 0.0);
  return sse_step(fm, s, none, &jumps, step_index, dt, Integrator::euler_maruyama);
}

namespace {

Mat lindblad_rhs(const FullModel& fm, const Mat& rho, double lambda) {
  Mat d = -I1 * (Mat(fm.H * rho) - Mat(rho * fm.H));
  for (std::size_t k = 0; k < fm.a.size(); ++k) {
    const SpMat& a = fm.a[k];
    const SpMat ad = a.adjoint();
    const SpMat n = ad * a;
    d += 2.0 * fm.kappa[k] * Mat(Mat(a * rho) * ad) - fm.kappa[k] * (Mat(n * rho) + Mat(rho * n));
  }
  if (fm.feedback && lambda != 0.0) {
    // D[c - iF] with c = sqrt(2k) a: averaged homodyne feedback
    const auto k = fm.feedback->mode;
    const SpMat F = feedback_full(fm, lambda);
    const SpMat c = std::sqrt(2.0 * fm.kappa[k]) * fm.a[k];
    const SpMat ad = c.adjoint();
    const Mat FrF = Mat(F * rho) * F;
    const Mat F2 = Mat(F * Mat(F * rho));
    d += FrF - 0.5 * (F2 + F2.adjoint());
    const Mat cr = c * rho, rc = rho * ad;
    d += -I1 * (Mat(F * Mat(cr + rc)) - Mat(Mat(cr + rc) * F));
  }
  return d;
}

}  // namespace

void lindblad_step(const FullModel& fm, OracleDensity& s, double dt) {
  auto lam = [&](double t) {
    if (!fm.feedback) return 0.0;
    if (fm.feedback->dynamic) throw std::invalid_argument("dynamic-lambda feedback has no averaged form");
    return fm.feedback->scheduled(t);
  };
  const Mat& r = s.rho;
  const Mat k1 = lindblad_rhs(fm, r, lam(s.time));
  const Mat k2 = lindblad_rhs(fm, r + 0.5 * dt * k1, lam(s.time + 0.5 * dt));
  const Mat k3 = lindblad_rhs(fm, r + 0.5 * dt * k2, lam(s.time + 0.5 * dt));
  const Mat k4 = lindblad_rhs(fm, r + dt * k3, lam(s.time + dt));
  s.rho = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  s.time += dt;
  if (top_population(fm, s.rho) > kLeakageBound) s.leakage = true;
}

}  // namespace cheom
