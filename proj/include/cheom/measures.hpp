#pragma once

#include <string>

#include "cheom/quantum_core.hpp"

namespace cheom {

struct SqueezingReport {
  double xi2;
  double var_jz;
  double mean_jx;
  double mean_jy;
};

double purity(const Mat& rho);
// nats. Eigenvalues down to -neg_tol are treated as zero (truncated hierarchy states).
double von_neumann_entropy(const Mat& rho, double neg_tol = 1e-10);
double trace_distance(const Mat& rho, const Mat& sigma);
double mutual_information(const Mat& rho, const Layout& layout, const std::string& part_a,
                          const std::string& part_b, double neg_tol = 1e-10);
double negativity(const Mat& rho, const Layout& layout, const std::string& part);
SqueezingReport spin_squeezing(const Mat& rho, int n_atoms);
double information_gain(double mean_of_entropies, double entropy_of_mean);

}  // namespace cheom
