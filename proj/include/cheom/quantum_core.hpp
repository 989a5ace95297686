#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cheom {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

constexpr cplx I1{0.0, 1.0};

// Ordered tensor factors. Labels are unique, dims positive.
class Layout {
 public:
  struct Factor {
    std::string label;
    int dim;
  };

  Layout() = default;
  explicit Layout(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  int total_dim() const;
  int index_of(const std::string& label) const;  // throws on unknown label
  std::vector<int> dims() const;

 private:
  std::vector<Factor> factors_;
};

Mat identity(int d);
Mat kron(const Mat& a, const Mat& b);
Mat kron_compose(const std::vector<Mat>& ops);
SpMat kron(const SpMat& a, const SpMat& b);
SpMat sparse_identity(int d);

// Collective spin J_axis in the symmetric sector j = n_atoms/2, basis m = j, j-1, ..., -j.
Mat collective_spin(int n_atoms, char axis);
Mat annihilation_op(int fock_dim);

Mat pauli_x();
Mat pauli_y();
Mat pauli_z();

// Embed a single-factor operator into the full layout.
Mat embed(const Mat& op, const Layout& layout, const std::string& label);
SpMat embed_sparse(const Mat& op, const Layout& layout, const std::string& label);

Mat partial_trace(const Mat& rho, const Layout& layout, const std::vector<std::string>& keep);
Mat partial_transpose(const Mat& rho, const Layout& layout, const std::string& part);

bool is_hermitian(const Mat& m, double tol = 1e-12);
std::vector<double> hermitian_eigvals(const Mat& m);

Mat commutator(const Mat& a, const Mat& b);
Mat ket_projector(const Vec& psi);
Mat expm_hermitian(const Mat& h, cplx factor);  // exp(factor * h) for Hermitian h

}  // namespace cheom
