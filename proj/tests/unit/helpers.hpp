#pragma once

#include <random>

#include "cheom/quantum_core.hpp"

namespace testutil {

using cheom::Mat;
using cheom::Vec;

inline Mat random_density(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = {n(rng), n(rng)};
  Mat r = a * a.adjoint();
  return r / r.trace();
}

inline Mat random_hermitian(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = {n(rng), n(rng)};
  return 0.5 * (a + a.adjoint());
}

inline Vec basis(int d, int i) {
  Vec v = Vec::Zero(d);
  v(i) = 1.0;
  return v;
}

inline Mat bell() {
  Vec v = Vec::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  return v * v.adjoint();
}

inline double maxabs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testutil
