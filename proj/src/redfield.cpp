#include "cheom/redfield.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace cheom {

RedfieldOperator::RedfieldOperator(const Mat& H_A, const Mat& L, double g, double delta, double kappa)
    : g2_(g * g), w_(kappa, delta) {
  Eigen::SelfAdjointEigenSolver<Mat> es((H_A + H_A.adjoint()) / 2.0);
  V_ = es.eigenvectors();
  E_ = es.eigenvalues();
  Lt_ = V_.adjoint() * L * V_;
}

Mat RedfieldOperator::at(double t) const {
  const auto d = Lt_.rows();
  Mat out(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const cplx r = w_ + I1 * (E_(i) - E_(j));
      out(i, j) = std::abs(r) < 1e-300 ? g2_ * Lt_(i, j) * t : g2_ * Lt_(i, j) * (1.0 - std::exp(-r * t)) / r;
    }
  return V_ * out * V_.adjoint();
}

std::vector<Mat> redfield_operator(const Mat& H_A, const Mat& L, double g, double delta, double kappa,
                                   const std::vector<double>& t_grid) {
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] < t_grid[i - 1]) throw std::invalid_argument("redfield_operator: t_grid must be ascending");
  RedfieldOperator op(H_A, L, g, delta, kappa);
  std::vector<Mat> out;
  for (double t : t_grid) out.push_back(op.at(t));
  return out;
}

Mat conditioned_redfield_step(const Mat& rho, const Mat& H_A, const Mat& L, const Mat& Lbar, double kappa, double g,
                              double dt, double dw) {
  const Mat r10 = Lbar * rho;
  const Mat r01 = rho * Lbar.adjoint();
  const Mat Ld = L.adjoint();
  Mat d = -I1 * commutator(H_A, rho) + commutator(r10, Ld) + commutator(L, r01);
  Mat out = rho + dt * d;
  if (g != 0.0) {
    const double s2k = std::sqrt(2.0 * kappa);
    const double ex = ((r10 - r01).trace() / (I1 * g) / rho.trace()).real();
    out += dw * (-s2k * ex * rho + (I1 / g * s2k) * (r01 - r10));
  }
  const double t = out.trace().real();
  if (!(t >= 0.5)) throw std::runtime_error("integration diverged: reduce dt");
  return out / t;
}

Mat bad_cavity_step(const Mat& rho, double g, double kappa, const Mat& L, const Mat& H_A, double dt, double dw,
                    Integrator integ) {
  const Mat c = (-I1 * g * std::sqrt(2.0 / kappa)) * L;
  const Mat cd = c.adjoint();
  const double ec = ((c + cd) * rho).trace().real() / rho.trace().real();
  const auto d = rho.rows();
  Mat out;
  if (integ == Integrator::kraus) {
    const double dy = dw + ec * dt;
    const Mat M = Mat::Identity(d, d) + dt * (-I1 * H_A - 0.5 * cd * c) + dy * c + 0.5 * (dy * dy - dt) * c * c;
    out = M * rho * M.adjoint();
  } else {
    out = rho + dt * (-I1 * commutator(H_A, rho) + c * rho * cd - 0.5 * (cd * c * rho + rho * cd * c)) +
          dw * (c * rho + rho * cd - ec * rho);
  }
  const double t = out.trace().real();
  if (!(t >= 0.5)) throw std::runtime_error("integration diverged: reduce dt");
  return out / t;
}

}  // namespace cheom
