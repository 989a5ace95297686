#include <doctest.h>

#include "cheom/quantum_core.hpp"
#include "helpers.hpp"

using namespace cheom;
using namespace testutil;

TEST_CASE("kron_compose") {
  CHECK(maxabs(kron_compose({identity(2), identity(3)}) - identity(6)) == 0.0);
  Mat zz = kron_compose({pauli_z(), identity(2)});
  Mat want = Mat::Zero(4, 4);
  want.diagonal() << 1, 1, -1, -1;
  CHECK(maxabs(zz - want) == 0.0);
  Vec out = kron_compose({pauli_x(), pauli_x()}) * basis(4, 0);
  CHECK(maxabs(out - basis(4, 3)) == 0.0);
  CHECK_THROWS_WITH(kron_compose({}), "no operands");
}

TEST_CASE("collective_spin") {
  CHECK(maxabs(collective_spin(1, 'z') - 0.5 * pauli_z()) < 1e-15);
  Mat jz2 = Mat::Zero(3, 3);
  jz2.diagonal() << 1, 0, -1;
  CHECK(maxabs(collective_spin(2, 'z') - jz2) < 1e-15);
  Mat jx = collective_spin(10, 'x'), jy = collective_spin(10, 'y'), jz = collective_spin(10, 'z');
  auto ev = hermitian_eigvals(jx);
  CHECK(ev.back() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(maxabs(commutator(jx, jy) - I1 * jz) < 1e-12);
  CHECK(maxabs(commutator(jy, jz) - I1 * jx) < 1e-12);
  CHECK_THROWS(collective_spin(2, 'w'));
}

TEST_CASE("annihilation_op") {
  Mat a2 = annihilation_op(2);
  Mat want = Mat::Zero(2, 2);
  want(0, 1) = 1.0;
  CHECK(maxabs(a2 - want) == 0.0);
  Mat a4 = annihilation_op(4);
  Mat n = a4.adjoint() * a4;
  Mat d = Mat::Zero(4, 4);
  d.diagonal() << 0, 1, 2, 3;
  CHECK(maxabs(n - d) < 1e-14);
  Mat a6 = annihilation_op(6);
  Mat c = commutator(a6, a6.adjoint());
  Mat cw = identity(6);
  cw(5, 5) = -5.0;
  CHECK(maxabs(c - cw) < 1e-12);
}

TEST_CASE("partial_trace") {
  Layout l2({{"A", 2}, {"B", 2}});
  Mat ra = random_density(2, 1), rb = random_density(2, 2);
  Mat prod = kron(ra, rb);
  CHECK(maxabs(partial_trace(prod, l2, {"A"}) - ra) < 1e-14);
  CHECK(maxabs(partial_trace(prod, l2, {"B"}) - rb) < 1e-14);
  CHECK(maxabs(partial_trace(bell(), l2, {"A"}) - 0.5 * identity(2)) < 1e-15);

  Layout l3({{"q1", 2}, {"q2", 2}, {"q3", 2}});
  Mat r = random_density(8, 3);
  Mat got = partial_trace(r, l3, {"q1", "q3"});
  Mat brute = Mat::Zero(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int c2 = 0; c2 < 2; ++c2)
          for (int b = 0; b < 2; ++b) brute(2 * a + c, 2 * a2 + c2) += r(4 * a + 2 * b + c, 4 * a2 + 2 * b + c2);
  CHECK(maxabs(got - brute) < 1e-12);
  CHECK_THROWS(partial_trace(r, l3, {"q9"}));
}

TEST_CASE("partial_transpose") {
  Layout l2({{"A", 2}, {"B", 2}});
  auto ev = hermitian_eigvals(partial_transpose(bell(), l2, "B"));
  CHECK(ev.front() == doctest::Approx(-0.5).epsilon(1e-12));
  Layout l({{"A", 2}, {"B", 3}});
  Mat r = random_density(6, 4);
  CHECK(maxabs(partial_transpose(partial_transpose(r, l, "B"), l, "B") - r) <= 1e-15);
}

TEST_CASE("hermitian_eigvals") {
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  auto e = hermitian_eigvals(d);
  REQUIRE(e.size() == 3);
  CHECK(e[0] == doctest::Approx(1));
  CHECK(e[1] == doctest::Approx(2));
  CHECK(e[2] == doctest::Approx(3));
  auto ex = hermitian_eigvals(pauli_x());
  CHECK(ex[0] == doctest::Approx(-1));
  CHECK(ex[1] == doctest::Approx(1));

  Mat h = random_hermitian(8, 5);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Mat rec = es.eigenvectors() * es.eigenvalues().cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  CHECK(maxabs(rec - h) < 1e-10);
  auto ev = hermitian_eigvals(h);
  for (int i = 0; i < 8; ++i) CHECK(ev[i] == doctest::Approx(es.eigenvalues()(i)).epsilon(1e-12));

  Mat nh = Mat::Zero(2, 2);
  nh(0, 1) = 1.0;
  CHECK_THROWS(hermitian_eigvals(nh));
}

TEST_CASE("embed and layout") {
  Layout l({{"atom", 2}, {"c", 3}});
  CHECK(l.total_dim() == 6);
  CHECK(l.index_of("c") == 1);
  CHECK_THROWS(l.index_of("x"));
  CHECK_THROWS(Layout({{"a", 2}, {"a", 2}}));
  Mat a = annihilation_op(3);
  CHECK(maxabs(embed(a, l, "c") - kron(identity(2), a)) == 0.0);
  CHECK(maxabs(Mat(embed_sparse(pauli_x(), l, "atom")) - kron(pauli_x(), identity(3))) == 0.0);
}

TEST_CASE("expm_hermitian") {
  // exp(-i pi/2 sigma_x) = -i sigma_x
  Mat u = expm_hermitian(pauli_x(), -I1 * (M_PI / 2));
  CHECK(maxabs(u + I1 * pauli_x()) < 1e-14);
}
