#include <doctest.h>

#include <cmath>
#include <set>

#include "cheom/noise.hpp"

using namespace cheom;

TEST_CASE("wiener determinism and moments") {
  NoiseStream a(42), b(42);
  const double dt = 1e-3;
  CHECK(a.wiener(dt) == b.wiener(dt));
  NoiseStream s(42);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    double w = s.wiener(dt);
    sum += w;
    sq += w * w;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4 * std::sqrt(dt / n));
  CHECK(std::abs(var - dt) < 0.05 * dt);
  CHECK(s.counter() == 2u * n);
}

TEST_CASE("complex wiener moments") {
  NoiseStream s(7);
  const double dt = 1e-3;
  const int n = 100000;
  cplx m = 0, m2 = 0;
  double ab = 0;
  for (int i = 0; i < n; ++i) {
    cplx w = s.complex_wiener(dt);
    m += w;
    m2 += w * w;
    ab += std::norm(w);
  }
  m /= n;
  m2 /= n;
  ab /= n;
  const double bound = 4 * std::sqrt(dt / n);
  CHECK(std::abs(m.real()) < bound);
  CHECK(std::abs(m.imag()) < bound);
  // E|dW|^2 = dt, E[dW^2] = 0 with std ~ dt/sqrt(n)
  CHECK(std::abs(ab - dt) < 0.02 * dt);
  CHECK(std::abs(m2) < 5 * dt / std::sqrt(double(n)));
  NoiseStream r1(9), r2(9);
  for (int i = 0; i < 100; ++i) CHECK(r1.complex_wiener(dt) == r2.complex_wiener(dt));
}

TEST_CASE("jump decisions") {
  CHECK_FALSE(jump_decision(0.0, 0.3));
  CHECK(jump_decision(0.3, 0.3));

  std::vector<NoiseStream> st{NoiseStream(5)};
  ThresholdJumpDriver drv(&st, {Detection::photodetect});
  const double gamma = 2.0, dt = 1e-3;
  std::vector<double> waits;
  double last = 0.0;
  for (std::size_t k = 0; waits.size() < 10000; ++k) {
    if (drv.decide(0, gamma, dt, k)) {
      double t = (k + 1) * dt;
      waits.push_back(t - last);
      last = t;
    }
  }
  double mean = 0;
  for (double w : waits) mean += w;
  mean /= waits.size();
  CHECK(std::abs(mean - 1.0 / gamma) < 0.05 / gamma);

  std::vector<NoiseStream> z{NoiseStream(6)};
  ThresholdJumpDriver none(&z, {Detection::photodetect});
  bool any = false;
  for (std::size_t k = 0; k < 1000000; ++k) any = any || none.decide(0, 0.0, dt, k);
  CHECK_FALSE(any);
}

TEST_CASE("record_path") {
  const std::vector<Detection> kinds{Detection::homodyne, Detection::heterodyne};
  std::vector<NoiseStream> a{NoiseStream(1), NoiseStream(2)};
  NoisePath p = record_path(a, 50, 1e-3, kinds);
  CHECK(p.real[0].size() == 50);
  CHECK(p.complex[1].size() == 50);
  std::vector<NoiseStream> b{NoiseStream(1), NoiseStream(2)};
  NoisePath q1 = record_path(b, 20, 1e-3, kinds);
  NoisePath q2 = record_path(b, 30, 1e-3, kinds);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(q1.real[0][i] == p.real[0][i]);
    CHECK(q1.complex[1][i] == p.complex[1][i]);
  }
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(q2.real[0][i] == p.real[0][20 + i]);
    CHECK(q2.complex[1][i] == p.complex[1][20 + i]);
  }
  CHECK(p.at(3).dw[0] == cplx(p.real[0][3], 0.0));
}

TEST_CASE("seed derivation") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(stream_seed(123, i, 0));
  CHECK(seen.size() == 1000);
  CHECK(stream_seed(1, 2, 0) != stream_seed(1, 2, 1));
}
