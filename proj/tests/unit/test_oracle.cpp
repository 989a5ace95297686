#include <doctest.h>

#include <cmath>

#include "cheom/measures.hpp"
#include "cheom/oracle.hpp"
#include "cheom/redfield.hpp"
#include "helpers.hpp"

using namespace cheom;
using namespace testutil;

namespace {

Model jc(double g, double kappa, Detection det = Detection::homodyne) {
  Model m;
  m.H_A = Mat::Zero(2, 2);
  m.H_A(0, 0) = -0.5;
  m.H_A(1, 1) = 0.5;
  ModeSpec md;
  md.g = g;
  md.delta = 1.0;
  md.kappa = kappa;
  md.L = annihilation_op(2);
  md.detection = det;
  m.modes = {md};
  return m;
}

}  // namespace

TEST_CASE("reduced_state") {
  FullModel fm = build_full_model(jc(1.0, 1.0), {3});
  Vec atom(2);
  atom << 0.6, cplx(0, 0.8);
  OracleVector v = oracle_vector(fm, atom);
  CHECK(maxabs(reduced_state(fm, v.psi) - ket_projector(atom)) < 1e-15);
  Vec ent = Vec::Zero(8);
  ent(1 * 4 + 0) = ent(0 * 4 + 1) = 1.0 / std::sqrt(2.0);
  CHECK(maxabs(reduced_state(fm, ent) - identity(2) / 2.0) < 1e-15);
  Mat r = random_density(8, 4);
  CHECK(maxabs(reduced_state(fm, r) - partial_trace(r, fm.layout, {"atom"})) < 1e-12);
}

TEST_CASE("SSE homodyne basics") {
  FullModel fm = build_full_model(jc(0.0, 1.0), {3});
  OracleVector v = oracle_vector(fm, Vec::Ones(2) / std::sqrt(2.0));
  NoiseStream ns(1);
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    sse_homodyne_step(fm, v, {{cplx(ns.wiener(dt))}}, dt);
    CHECK(std::abs(v.psi.norm() - 1.0) < 1e-8);
  }
  CHECK(top_population(fm, v.psi) == 0.0);
  Vec a0 = Vec::Ones(2) / std::sqrt(2.0);
  Mat u = expm_hermitian(jc(0.0, 1.0).H_A, -I1 * 1.0);
  Mat want = u * ket_projector(a0) * u.adjoint();
  CHECK(trace_distance(reduced_state(fm, v.psi), want) < 1e-6);
}

TEST_CASE("noise-free SME reproduces the Lindblad equation") {
  FullModel fm = build_full_model(jc(1.5, 2.0), {4});
  Vec e = basis(2, 1);
  OracleDensity a = oracle_density(fm, ket_projector(e)), b = a;
  const double dt = 1e-4;
  for (int k = 0; k < 10000; ++k) {
    sme_homodyne_step(fm, a, {{cplx(0.0)}}, dt);
    lindblad_step(fm, b, dt);
  }
  CHECK(trace_distance(reduced_state(fm, a.rho), reduced_state(fm, b.rho)) < 1e-3);
}

TEST_CASE("SSE and SME agree on a shared path") {
  FullModel fm = build_full_model(jc(1.0, 1.0), {4});
  Vec e = basis(2, 1);
  OracleVector v = oracle_vector(fm, e);
  OracleDensity d = oracle_density(fm, ket_projector(e));
  NoiseStream ns(8);
  const double dt = 1e-4;
  for (int k = 0; k < 5000; ++k) {
    StepNoise n{{cplx(ns.wiener(dt))}};
    sse_homodyne_step(fm, v, n, dt, Integrator::kraus);
    sme_homodyne_step(fm, d, n, dt, Integrator::kraus);
  }
  CHECK(trace_distance(ket_projector(v.psi), d.rho) < 1e-6);
}

TEST_CASE("jump oracle: single excitation") {
  FullModel fm = build_full_model(jc(2.0, 3.0, Detection::photodetect), {2});
  const double dt = 1e-3;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<NoiseStream> st{NoiseStream(seed)};
    ThresholdJumpDriver drv(&st, {Detection::photodetect});
    OracleVector v = oracle_vector(fm, basis(2, 1));
    int jumps = 0;
    for (std::size_t k = 0; k < 8000; ++k) {
      auto info = sse_jump_step(fm, v, drv, k, dt);
      if (info.jumped[0]) {
        ++jumps;
        CHECK(std::abs(std::abs(v.psi(0)) - 1.0) < 1e-9);
      }
    }
    CHECK(jumps == 1);
  }
  std::vector<NoiseStream> st{NoiseStream(1)};
  ThresholdJumpDriver drv(&st, {Detection::photodetect});
  OracleVector g = oracle_vector(fm, basis(2, 0));
  for (std::size_t k = 0; k < 2000; ++k) CHECK_FALSE(sse_jump_step(fm, g, drv, k, dt).jumped[0]);
}

TEST_CASE("heterodyne oracle: decoupled atom unaffected") {
  FullModel fm = build_full_model(jc(0.0, 1.0, Detection::heterodyne), {2});
  OracleVector v = oracle_vector(fm, basis(2, 1));
  NoiseStream ns(4);
  for (int k = 0; k < 500; ++k) sse_heterodyne_step(fm, v, {{ns.complex_wiener(1e-3)}}, 1e-3);
  CHECK(std::abs(reduced_state(fm, v.psi)(1, 1) - 1.0) < 1e-12);
}

TEST_CASE("Redfield operator") {
  Mat L = annihilation_op(2);
  Mat H = Mat::Zero(2, 2);
  H(0, 0) = -0.5;
  H(1, 1) = 0.5;
  RedfieldOperator r(H, L, 1.0, 1.0, 3.0);
  CHECK(maxabs(r.at(0.0)) == 0.0);
  const double g = 0.7, d = 0.4, k = 1.1, t = 0.9;
  RedfieldOperator z(Mat::Zero(2, 2), L, g, d, k);
  const cplx w(k, d);
  CHECK(maxabs(z.at(t) - g * g * L * ((1.0 - std::exp(-w * t)) / w)) < 1e-14);
  RedfieldOperator big(H, L, 1.0, 0.0, 100.0);
  Mat lim = big.at(5.0), want = L / 100.0;
  CHECK(maxabs(lim - want) < 0.01 * maxabs(want));
  auto grid = redfield_operator(H, L, 1.0, 1.0, 3.0, {0.0, 0.5, 1.0});
  CHECK(maxabs(grid[2] - r.at(1.0)) < 1e-15);
}

TEST_CASE("Redfield and bad-cavity steps") {
  Mat H = Mat::Zero(2, 2);
  H(0, 0) = -0.5;
  H(1, 1) = 0.5;
  H += 0.25 * pauli_x();
  Mat L = annihilation_op(2);
  Mat rho0 = ket_projector(basis(2, 1));
  Mat a = rho0, b = rho0;
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    a = conditioned_redfield_step(a, H, L, Mat::Zero(2, 2), 2.0, 1.0, dt, 0.03);
    b = bad_cavity_step(b, 0.0, 2.0, L, H, dt, 0.03);
  }
  Mat u = expm_hermitian(H, -I1 * 1.0);
  Mat want = u * rho0 * u.adjoint();
  CHECK(trace_distance(a, want) < 1e-3);
  CHECK(trace_distance(b, want) < 1e-3);

  Mat c = rho0;
  NoiseStream ns(2);
  double worst = 1.0;
  for (int k = 0; k < 5000; ++k) {
    c = bad_cavity_step(c, 2.0, 3.0, L, H, dt, ns.wiener(dt));
    worst = std::min(worst, purity(c));
  }
  CHECK(worst > 1.0 - 1e-6);
}
