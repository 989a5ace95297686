#include "cheom/quantum_core.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace cheom {

Layout::Layout(std::vector<Factor> factors) : factors_(std::move(factors)) {
  std::set<std::string> seen;
  for (const auto& f : factors_) {
    if (f.dim < 1) throw std::invalid_argument("layout factor '" + f.label + "' has non-positive dim");
    if (!seen.insert(f.label).second) throw std::invalid_argument("duplicate layout label '" + f.label + "'");
  }
}

int Layout::total_dim() const {
  int d = 1;
  for (const auto& f : factors_) d *= f.dim;
  return d;
}

int Layout::index_of(const std::string& label) const {
  for (size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].label == label) return static_cast<int>(i);
  throw std::invalid_argument("unknown layout label '" + label + "'");
}

std::vector<int> Layout::dims() const {
  std::vector<int> d;
  for (const auto& f : factors_) d.push_back(f.dim);
  return d;
}

Mat identity(int d) { return Mat::Identity(d, d); }

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat kron_compose(const std::vector<Mat>& ops) {
  if (ops.empty()) throw std::invalid_argument("no operands");
  for (const auto& op : ops)
    if (op.rows() != op.cols()) throw std::invalid_argument("kron_compose: operand not square");
  Mat out = ops.front();
  for (size_t i = 1; i < ops.size(); ++i) out = kron(out, ops[i]);
  return out;
}

SpMat kron(const SpMat& a, const SpMat& b) {
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<size_t>(a.nonZeros() * b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka)
    for (SpMat::InnerIterator ia(a, ka); ia; ++ia)
      for (int kb = 0; kb < b.outerSize(); ++kb)
        for (SpMat::InnerIterator ib(b, kb); ib; ++ib)
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                         ia.value() * ib.value());
  SpMat out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SpMat sparse_identity(int d) {
  SpMat s(d, d);
  s.setIdentity();
  return s;
}

Mat collective_spin(int n_atoms, char axis) {
  if (n_atoms < 1) throw std::invalid_argument("collective_spin: n_atoms must be >= 1");
  const double j = n_atoms / 2.0;
  const int d = n_atoms + 1;
  Mat jp = Mat::Zero(d, d);
  // basis index i <-> m = j - i; J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
  for (int i = 1; i < d; ++i) {
    double m = j - i;
    jp(i - 1, i) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  switch (axis) {
    case 'x': return (jp + jp.adjoint()) / 2.0;
    case 'y': return (jp - jp.adjoint()) / (2.0 * I1);
    case 'z': {
      Mat z = Mat::Zero(d, d);
      for (int i = 0; i < d; ++i) z(i, i) = j - i;
      return z;
    }
    default: throw std::invalid_argument("collective_spin: axis must be x, y or z");
  }
}

Mat annihilation_op(int fock_dim) {
  if (fock_dim < 2) throw std::invalid_argument("annihilation_op: fock_dim must be >= 2");
  Mat a = Mat::Zero(fock_dim, fock_dim);
  for (int n = 1; n < fock_dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Mat pauli_y() {
  Mat m(2, 2);
  m << 0, -I1, I1, 0;
  return m;
}

Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Mat embed(const Mat& op, const Layout& layout, const std::string& label) {
  const int pos = layout.index_of(label);
  std::vector<Mat> ops;
  for (size_t i = 0; i < layout.factors().size(); ++i) {
    if (static_cast<int>(i) == pos) {
      if (op.rows() != layout.factors()[i].dim) throw std::invalid_argument("embed: dim mismatch for '" + label + "'");
      ops.push_back(op);
    } else {
      ops.push_back(identity(layout.factors()[i].dim));
    }
  }
  return kron_compose(ops);
}

SpMat embed_sparse(const Mat& op, const Layout& layout, const std::string& label) {
  const int pos = layout.index_of(label);
  SpMat out;
  bool first = true;
  for (size_t i = 0; i < layout.factors().size(); ++i) {
    SpMat f;
    if (static_cast<int>(i) == pos) {
      if (op.rows() != layout.factors()[i].dim) throw std::invalid_argument("embed: dim mismatch for '" + label + "'");
      f = op.sparseView();
    } else {
      f = sparse_identity(layout.factors()[i].dim);
    }
    out = first ? f : kron(out, f);
    first = false;
  }
  return out;
}

namespace {

// Decompose a flat index into per-factor digits (row-major over factors).
void digits(int idx, const std::vector<int>& dims, std::vector<int>& out) {
  for (int f = static_cast<int>(dims.size()) - 1; f >= 0; --f) {
    out[f] = idx % dims[f];
    idx /= dims[f];
  }
}

}  // namespace

Mat partial_trace(const Mat& rho, const Layout& layout, const std::vector<std::string>& keep) {
  const auto dims = layout.dims();
  if (rho.rows() != layout.total_dim() || rho.cols() != rho.rows())
    throw std::invalid_argument("partial_trace: rho dim does not match layout");
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  std::vector<bool> kept(dims.size(), false);
  for (const auto& l : keep) kept[layout.index_of(l)] = true;

  std::vector<int> kdims;
  for (size_t f = 0; f < dims.size(); ++f)
    if (kept[f]) kdims.push_back(dims[f]);
  int dk = 1;
  for (int d : kdims) dk *= d;

  Mat out = Mat::Zero(dk, dk);
  const int n = layout.total_dim();
  std::vector<int> di(dims.size()), dj(dims.size());
  for (int i = 0; i < n; ++i) {
    digits(i, dims, di);
    for (int j = 0; j < n; ++j) {
      digits(j, dims, dj);
      bool match = true;
      int ri = 0, rj = 0;
      for (size_t f = 0; f < dims.size(); ++f) {
        if (kept[f]) {
          ri = ri * dims[f] + di[f];
          rj = rj * dims[f] + dj[f];
        } else if (di[f] != dj[f]) {
          match = false;
          break;
        }
      }
      if (match) out(ri, rj) += rho(i, j);
    }
  }
  return out;
}

Mat partial_transpose(const Mat& rho, const Layout& layout, const std::string& part) {
  const auto dims = layout.dims();
  if (rho.rows() != layout.total_dim() || rho.cols() != rho.rows())
    throw std::invalid_argument("partial_transpose: rho dim does not match layout");
  const int p = layout.index_of(part);
  const int n = layout.total_dim();
  Mat out(n, n);
  std::vector<int> di(dims.size()), dj(dims.size());
  for (int i = 0; i < n; ++i) {
    digits(i, dims, di);
    for (int j = 0; j < n; ++j) {
      digits(j, dims, dj);
      std::swap(di[p], dj[p]);
      int ti = 0, tj = 0;
      for (size_t f = 0; f < dims.size(); ++f) {
        ti = ti * dims[f] + di[f];
        tj = tj * dims[f] + dj[f];
      }
      std::swap(di[p], dj[p]);
      out(ti, tj) = rho(i, j);
    }
  }
  return out;
}

bool is_hermitian(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

std::vector<double> hermitian_eigvals(const Mat& m) {
  if (!is_hermitian(m, 1e-10)) throw std::invalid_argument("hermitian_eigvals: matrix is not Hermitian");
  Mat h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

Mat ket_projector(const Vec& psi) { return psi * psi.adjoint(); }

Mat expm_hermitian(const Mat& h, cplx factor) {
  Eigen::SelfAdjointEigenSolver<Mat> es((h + h.adjoint()) / 2.0);
  Vec ph = (factor * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace cheom
