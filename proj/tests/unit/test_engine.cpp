#include <doctest.h>

#include <cmath>

#include "cheom/engine.hpp"
#include "cheom/experiments.hpp"
#include "cheom/measures.hpp"
#include "cheom/oracle.hpp"
#include "helpers.hpp"

using namespace cheom;
using namespace testutil;

namespace {

Mat jc_h(double omega, double eps) {
  Mat h = Mat::Zero(2, 2);
  h(0, 0) = -omega / 2;
  h(1, 1) = omega / 2;
  return h + 0.5 * eps * pauli_x();
}

Model jc_model(double g, double eps, Detection det = Detection::homodyne) {
  Model m;
  m.H_A = jc_h(1.0, eps);
  ModeSpec md;
  md.g = g;
  md.delta = 1.0;
  md.kappa = 2.0;
  md.L = annihilation_op(2);
  md.detection = det;
  m.modes = {md};
  return m;
}

// Random full state with cavity occupation limited to levels <= lmax, so truncated operators act exactly.
Mat low_occupation_state(const FullModel& fm, int lmax, std::uint64_t seed) {
  const int n = fm.layout.total_dim();
  Mat r = random_density(n, seed);
  const auto dims = fm.layout.dims();
  Vec keep = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    int rem = i;
    bool ok = true;
    for (int f = static_cast<int>(dims.size()) - 1; f >= 1; --f) {
      ok = ok && (rem % dims[f]) <= lmax;
      rem /= dims[f];
    }
    keep(i) = ok ? 1.0 : 0.0;
  }
  Mat p = keep.asDiagonal();
  Mat s = p * r * p;
  return s / s.trace();
}

// rho^(n,m) = prod_k (i g_k)^{n_k} (-i g_k)^{m_k} tr_C(a^n rho a†^m)
Hierarchy exact_hierarchy(const FullModel& fm, const Model& m, const IndexSet& set, const Mat& rho) {
  Hierarchy x;
  for (const auto& mi : set.all()) {
    Mat left = identity(fm.layout.total_dim()), right = left;
    cplx c = 1.0;
    for (std::size_t k = 0; k < m.modes.size(); ++k) {
      Mat a = Mat(fm.a[k]);
      for (int q = 0; q < mi.n[k]; ++q) left = a * left;
      for (int q = 0; q < mi.m[k]; ++q) right = right * a.adjoint();
      c *= std::pow(I1 * m.modes[k].g, mi.n[k]) * std::pow(-I1 * m.modes[k].g, mi.m[k]);
    }
    x.push_back(c * partial_trace(left * rho * right, fm.layout, {"atom"}));
  }
  return x;
}

Mat lindblad_rhs(const FullModel& fm, const Mat& rho) {
  Mat h = Mat(fm.H);
  Mat d = -I1 * (h * rho - rho * h);
  for (std::size_t k = 0; k < fm.a.size(); ++k) {
    Mat a = Mat(fm.a[k]);
    Mat ad = a.adjoint();
    d += fm.kappa[k] * (2.0 * a * rho * ad - ad * a * rho - rho * ad * a);
  }
  return d;
}

}  // namespace

TEST_CASE("aux count and enumeration") {
  CHECK(aux_count(3, 3) == 84u);
  CHECK(aux_count(1, 0) == 1u);
  auto idx = enumerate_indices(1, 2);
  REQUIRE(idx.size() == 6);
  const int want[6][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}};
  for (int i = 0; i < 6; ++i) {
    CHECK(idx[i].n[0] == want[i][0]);
    CHECK(idx[i].m[0] == want[i][1]);
  }
  CHECK_THROWS_AS(aux_count(60, 60), std::overflow_error);
  IndexSet s(2, 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& a = s[s.adjoint(i)];
    CHECK(a.n == s[i].m);
    CHECK(a.m == s[i].n);
  }
}

TEST_CASE("drift matches the exact hierarchy map of the Lindblad generator") {
  for (int modes : {1, 2}) {
    Model m = jc_model(0.7, 0.4);
    if (modes == 2) {
      ModeSpec b = m.modes[0];
      b.g = 0.45;
      b.delta = -0.3;
      b.kappa = 1.3;
      b.L = pauli_z();
      m.modes.push_back(b);
    }
    const int kmax = 3;
    Engine e(m, kmax);
    FullModel fm = build_full_model(m, std::vector<int>(modes, 6));
    Mat rho = low_occupation_state(fm, 2, 17 + modes);
    Hierarchy x = exact_hierarchy(fm, m, e.indices(), rho);
    Hierarchy want = exact_hierarchy(fm, m, e.indices(), lindblad_rhs(fm, rho));
    Hierarchy got = e.drift(x);
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (e.indices()[i].depth() < kmax) worst = std::max(worst, maxabs(got[i] - want[i]));
    CHECK(worst < 1e-12);
    // moments read back from the hierarchy
    Mat ad = Mat(fm.a[0]).adjoint();
    CHECK(std::abs(e.quadrature(x, 0) - (Mat(fm.a[0]) + ad).cwiseProduct(rho.transpose()).sum().real()) < 1e-12);
    CHECK(std::abs(e.photon_number(x, 0) - (ad * Mat(fm.a[0]) * rho).trace().real()) < 1e-12);
  }
}

TEST_CASE("drift trivia") {
  Model m = jc_model(2.0, 0.0);
  Engine e(m, 2);
  auto st = e.initial_state(ket_projector(basis(2, 0)));
  for (const auto& d : e.drift(st.rho)) CHECK(maxabs(d) < 1e-15);
  Hierarchy z = zeros_like(st.rho);
  for (const auto& d : e.drift(z)) CHECK(maxabs(d) == 0.0);
  CHECK(e.quadrature(st.rho, 0) == 0.0);
  CHECK(e.current(st.rho, 0, 0.0, 1e-3) == 0.0);
  CHECK(e.current(st.rho, 0, 0.02, 1e-3) == doctest::Approx(20.0));
  CHECK(e.moment(st.rho, {{0}, {0}}) == cplx(1.0));
  CHECK(std::abs(e.moment(st.rho, {{1}, {1}})) == 0.0);
  CHECK_THROWS(e.moment(st.rho, {{3}, {0}}));
  StepNoise n{{cplx(0.03)}};
  for (const auto& d : e.homodyne_term(st.rho, n)) CHECK(maxabs(d) == 0.0);
  Engine e0(m, 0);
  CHECK_THROWS_WITH(e0.quadrature(e0.initial_state(identity(2) / 2.0).rho, 0), "first-level auxiliaries required");
  Model bad = m;
  bad.modes[0].L = identity(3);
  CHECK_THROWS(Engine(bad, 2));
}

TEST_CASE("one Ito step agrees with the full SME step on the same increment") {
  for (Detection det : {Detection::homodyne, Detection::heterodyne, Detection::unmonitored}) {
    Model m = jc_model(0.8, 0.5, det);
    Engine e(m, 3);
    FullModel fm = build_full_model(m, {6});
    Mat rho = low_occupation_state(fm, 2, 31);
    HierarchyState st{e.index_ptr(), exact_hierarchy(fm, m, e.indices(), rho)};
    OracleDensity od{rho};
    const double dt = 1e-3;
    StepNoise n{{det == Detection::heterodyne ? cplx(0.021, -0.013) : cplx(0.027)}};
    if (det == Detection::unmonitored) n.dw[0] = 0.0;
    StepInfo a = e.step_ito(st, n, nullptr, 0, dt);
    StepInfo b = sme_step(fm, od, n, nullptr, 0, dt, Integrator::euler_maruyama);
    CHECK(maxabs(st.rho[0] - reduced_state(fm, od.rho)) < 1e-10);
    CHECK(std::abs(a.current[0] - b.current[0]) < 1e-8);
  }
}

TEST_CASE("undriven JC photodetection: one jump into the ground state") {
  Model m = jc_model(2.0, 0.0, Detection::photodetect);
  m.modes[0].kappa = 3.0;
  Engine e(m, 2);
  const double dt = 1e-3;
  int total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<NoiseStream> st{NoiseStream(seed)};
    ThresholdJumpDriver drv(&st, {Detection::photodetect});
    auto s = e.initial_state(ket_projector(basis(2, 1)));
    int jumps = 0;
    for (std::size_t k = 0; k < 8000; ++k) {
      auto info = e.step_ito(s, {{cplx(0.0)}}, &drv, k, dt);
      if (info.jumped[0]) {
        ++jumps;
        CHECK(std::abs(s.rho[0](0, 0) - 1.0) < 1e-9);
      }
    }
    CHECK(jumps == 1);
    total += jumps;
  }
  CHECK(total == 5);
}

TEST_CASE("feedback increment") {
  Model m = jc_model(1.0, 0.0);
  FeedbackSpec fb;
  fb.op = Mat::Zero(2, 2);
  m.feedback = fb;
  Engine e0(m, 2);
  auto st = e0.initial_state(ket_projector(basis(2, 1)));
  st.rho[1] = random_hermitian(2, 3);
  for (const auto& d : e0.feedback_increment(st.rho, 0.5, 0.01, 1e-3)) CHECK(maxabs(d) == 0.0);
  m.feedback->op = identity(2);
  Engine e1(m, 2);
  for (const auto& d : e1.feedback_increment(st.rho, 0.5, 0.0, 1e-3)) CHECK(maxabs(d) < 1e-15);
  m.feedback->op = Mat::Zero(2, 2);
  m.feedback->op(0, 1) = 1.0;
  CHECK_THROWS(Engine(m, 2));
}

TEST_CASE("dynamic feedback cancels the stochastic shift of <Jz>") {
  FeedbackConfig fc;
  fc.dynamic = true;
  fc.centered = true;
  auto cfg = build_spin_squeezing(1.0, 10, 0.5, 1.0, fc);
  cfg.k_max = 4;
  auto sc = make_scenario(cfg);
  Engine e(sc.model, cfg.k_max);
  auto s = e.initial_state(sc.rho0);
  CHECK(e.dynamic_lambda(s.rho) == doctest::Approx(0.0).scale(1.0));
  for (std::size_t k = 0; k < 200; ++k) e.step_ito(s, {{cplx(0.0)}}, nullptr, k, 5e-3);
  const Mat jz = spin_operator(sc, 'z');
  const double dt = 1e-4, w = 3.0 * std::sqrt(dt);
  auto shift = [&](const Engine& eng, double dw) {
    HierarchyState c = s;
    double before = (jz * c.rho[0]).trace().real();
    eng.step_ito(c, {{cplx(dw)}}, nullptr, 0, dt);
    return (jz * c.rho[0]).trace().real() - before;
  };
  const double with_fb = shift(e, w) - shift(e, -w);
  Model off = sc.model;
  off.feedback.reset();
  Engine eo(off, cfg.k_max);
  const double without = shift(eo, w) - shift(eo, -w);
  CHECK(std::abs(without) > 1e-3);
  CHECK(std::abs(with_fb) < std::pow(dt, 1.5) * 10);
}

TEST_CASE("Stratonovich path") {
  Model m = jc_model(0.0, 0.3);
  Engine e(m, 2);
  auto s = e.initial_state(ket_projector(basis(2, 1)));
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) e.step_stratonovich(s, 0.0, dt);
  Mat u = expm_hermitian(m.H_A, -I1 * 1.0);
  CHECK(maxabs(s.rho[0] - u * ket_projector(basis(2, 1)) * u.adjoint()) < 1e-6);
  Model two = jc_model(1.0, 0.0);
  two.modes.push_back(two.modes[0]);
  Engine e2(two, 2);
  auto s2 = e2.initial_state(identity(2) / 2.0);
  CHECK_THROWS_WITH(e2.step_stratonovich(s2, 0.0, dt), "Stratonovich path implemented single-mode only");
}

TEST_CASE("Kraus step keeps adjoint pairs exact") {
  Model m = jc_model(2.0, 0.5);
  Engine e(m, 4);
  auto s = e.initial_state(ket_projector(basis(2, 1)));
  NoiseStream ns(3);
  for (std::size_t k = 0; k < 2000; ++k) e.step_kraus(s, {{cplx(ns.wiener(1e-3))}}, nullptr, k, 1e-3);
  double worst = 0;
  for (std::size_t i = 0; i < s.rho.size(); ++i)
    worst = std::max(worst, maxabs(s.rho[i] - s.rho[e.indices().adjoint(i)].adjoint()));
  CHECK(worst < 1e-8);
  CHECK(std::abs(s.rho[0].trace() - 1.0) < 1e-8);
  for (double l : hermitian_eigvals(s.rho[0])) CHECK(l > -1e-6);
}
