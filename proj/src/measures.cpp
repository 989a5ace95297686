#include "cheom/measures.hpp"

#include <cmath>
#include <stdexcept>

namespace cheom {

double purity(const Mat& rho) { return (rho * rho).trace().real(); }

double von_neumann_entropy(const Mat& rho, double neg_tol) {
  if (std::abs(rho.trace() - 1.0) > 1e-8) throw std::invalid_argument("not a state: trace != 1");
  double s = 0.0;
  for (double l : hermitian_eigvals(rho)) {
    if (l < -neg_tol) throw std::invalid_argument("not a state");
    if (l > 1e-14) s -= l * std::log(l);
  }
  return s;
}

double trace_distance(const Mat& rho, const Mat& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw std::invalid_argument("trace_distance: dim mismatch");
  double t = 0.0;
  for (double l : hermitian_eigvals(rho - sigma)) t += std::abs(l);
  return t;
}

double mutual_information(const Mat& rho, const Layout& layout, const std::string& part_a,
                          const std::string& part_b, double neg_tol) {
  if (layout.factors().size() != 2) throw std::invalid_argument("mutual_information: expects a two-factor layout");
  const Mat ra = partial_trace(rho, layout, {part_a});
  const Mat rb = partial_trace(rho, layout, {part_b});
  return von_neumann_entropy(ra, neg_tol) + von_neumann_entropy(rb, neg_tol) - von_neumann_entropy(rho, neg_tol);
}

double negativity(const Mat& rho, const Layout& layout, const std::string& part) {
  const Mat pt = partial_transpose(rho, layout, part);
  double norm1 = 0.0;
  for (double l : hermitian_eigvals(pt)) norm1 += std::abs(l);
  double n = (norm1 - 1.0) / 2.0;
  if (n < 0.0 && n > -1e-10) n = 0.0;
  return n;
}

SqueezingReport spin_squeezing(const Mat& rho, int n_atoms) {
  const Mat jx = collective_spin(n_atoms, 'x');
  const Mat jy = collective_spin(n_atoms, 'y');
  const Mat jz = collective_spin(n_atoms, 'z');
  if (rho.rows() != jz.rows()) throw std::invalid_argument("spin_squeezing: state dim does not match n_atoms");
  SqueezingReport r{};
  r.mean_jx = (jx * rho).trace().real();
  r.mean_jy = (jy * rho).trace().real();
  const double mz = (jz * rho).trace().real();
  r.var_jz = std::max(0.0, (jz * jz * rho).trace().real() - mz * mz);
  const double den = r.mean_jx * r.mean_jx + r.mean_jy * r.mean_jy;
  if (den < 1e-12) throw std::domain_error("undefined squeezing direction");
  r.xi2 = n_atoms * r.var_jz / den;
  return r;
}

double information_gain(double mean_of_entropies, double entropy_of_mean) {
  return entropy_of_mean - mean_of_entropies;
}

}  // namespace cheom
