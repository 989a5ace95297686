#include <doctest.h>

#include <cmath>

#include "cheom/measures.hpp"
#include "helpers.hpp"

using namespace cheom;
using namespace testutil;

TEST_CASE("entropy") {
  CHECK(std::abs(von_neumann_entropy(ket_projector(basis(3, 1)))) < 1e-12);
  CHECK(von_neumann_entropy(identity(4) / 4.0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  Mat d = Mat::Zero(2, 2);
  d.diagonal() << 0.7, 0.3;
  CHECK(von_neumann_entropy(d) == doctest::Approx(-0.7 * std::log(0.7) - 0.3 * std::log(0.3)));
  CHECK(von_neumann_entropy(d) == doctest::Approx(0.6109).epsilon(1e-4));
  CHECK_THROWS_WITH_AS(von_neumann_entropy(2.0 * d), doctest::Contains("not a state"), std::invalid_argument);
  Mat e = Mat::Zero(2, 2);
  e(0, 0) = 1.0 + 1e-6;
  e(1, 1) = -1e-6;
  CHECK_THROWS_AS(von_neumann_entropy(e), std::invalid_argument);
  CHECK(std::abs(von_neumann_entropy(e, 1e-4)) < 1e-5);
}

TEST_CASE("purity") {
  CHECK(purity(ket_projector(basis(2, 0))) == doctest::Approx(1.0));
  CHECK(purity(identity(4) / 4.0) == doctest::Approx(0.25));
}

TEST_CASE("trace distance") {
  Mat r = random_density(3, 9);
  CHECK(trace_distance(r, r) < 1e-14);
  CHECK(trace_distance(ket_projector(basis(2, 0)), ket_projector(basis(2, 1))) == doctest::Approx(2.0));
  CHECK(trace_distance(ket_projector(basis(2, 0)), identity(2) / 2.0) == doctest::Approx(1.0));
  CHECK_THROWS(trace_distance(identity(2) / 2.0, identity(3) / 3.0));
}

TEST_CASE("mutual information") {
  Layout l({{"A", 2}, {"B", 2}});
  CHECK(std::abs(mutual_information(kron(random_density(2, 1), random_density(2, 2)), l, "A", "B")) < 1e-10);
  CHECK(mutual_information(bell(), l, "A", "B") == doctest::Approx(2 * std::log(2.0)).epsilon(1e-10));
  Mat cc = Mat::Zero(4, 4);
  cc(0, 0) = cc(3, 3) = 0.5;
  CHECK(mutual_information(cc, l, "A", "B") == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("negativity") {
  Layout l({{"A", 2}, {"B", 2}});
  CHECK(std::abs(negativity(kron(random_density(2, 3), random_density(2, 4)), l, "B")) < 1e-10);
  CHECK(negativity(bell(), l, "B") == doctest::Approx(0.5).epsilon(1e-12));
  Mat w = bell() / 3.0 + (2.0 / 3.0) * identity(4) / 4.0;
  CHECK(std::abs(negativity(w, l, "B")) < 1e-8);
}

TEST_CASE("spin squeezing") {
  const int N = 10;
  Mat jy = collective_spin(N, 'y');
  Vec top = basis(N + 1, 0);
  Vec css = expm_hermitian(jy, -I1 * (M_PI / 2)) * top;
  auto rep = spin_squeezing(ket_projector(css), N);
  CHECK(rep.xi2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.mean_jx == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(rep.var_jz == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS(spin_squeezing(ket_projector(top), N));

  // Twisting about z leaves Var(J_z) unchanged, so the squeezed axis is rotated onto z about x.
  Mat jz = collective_spin(N, 'z'), jx = collective_spin(N, 'x');
  Vec tw = expm_hermitian(jz * jz, -I1 * 0.05) * css;
  double best = 1.0;
  for (int i = 0; i < 180; ++i) {
    Vec r = expm_hermitian(jx, -I1 * (M_PI * i / 180.0)) * tw;
    best = std::min(best, spin_squeezing(ket_projector(r), N).xi2);
  }
  CHECK(best < 0.8);
  CHECK(spin_squeezing(ket_projector(tw), N).xi2 > 1.0);
}

TEST_CASE("information gain") {
  CHECK(information_gain(0.0, 0.0) == 0.0);
  CHECK(information_gain(0.0, std::log(2.0)) == doctest::Approx(std::log(2.0)));
  Mat a = Mat::Zero(2, 2), b = Mat::Zero(2, 2);
  a.diagonal() << 0.9, 0.1;
  b.diagonal() << 0.1, 0.9;
  double mean_s = 0.5 * (von_neumann_entropy(a) + von_neumann_entropy(b));
  double g = information_gain(mean_s, von_neumann_entropy(0.5 * (a + b)));
  CHECK(g == doctest::Approx(std::log(2.0) - 0.3251).epsilon(1e-3));
}
