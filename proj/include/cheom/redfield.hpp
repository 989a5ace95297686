#pragma once

#include <vector>

#include "cheom/engine.hpp"

namespace cheom {

// Lbar(t) solving dLbar/dt = -i[H_A, Lbar] - w Lbar + g^2 L, Lbar(0) = 0, w = kappa + i delta.
// Evaluated exactly in the eigenbasis of H_A.
class RedfieldOperator {
 public:
  RedfieldOperator(const Mat& H_A, const Mat& L, double g, double delta, double kappa);
  Mat at(double t) const;

 private:
  Mat V_, Lt_;  // eigenvectors, L in eigenbasis
  Eigen::VectorXd E_;
  double g2_;
  cplx w_;
};

std::vector<Mat> redfield_operator(const Mat& H_A, const Mat& L, double g, double delta, double kappa,
                                   const std::vector<double>& t_grid);

// Euler-Maruyama step of the conditioned Redfield equation (first-level closure rho10 = Lbar rho).
Mat conditioned_redfield_step(const Mat& rho, const Mat& H_A, const Mat& L, const Mat& Lbar, double kappa, double g,
                              double dt, double dw);

// Bad-cavity SME with c = -i g sqrt(2/kappa) L. Kraus form keeps pure states pure.
Mat bad_cavity_step(const Mat& rho, double g, double kappa, const Mat& L, const Mat& H_A, double dt, double dw,
                    Integrator integ = Integrator::kraus);

}  // namespace cheom
