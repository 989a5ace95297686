#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "cheom/quantum_core.hpp"

namespace cheom {

struct MultiIndex {
  std::vector<int> n;
  std::vector<int> m;

  int depth() const;
  bool operator==(const MultiIndex& o) const { return n == o.n && m == o.m; }
  bool operator<(const MultiIndex& o) const { return n != o.n ? n < o.n : m < o.m; }
};

// K = (2M + kmax)! / ((2M)! kmax!); throws std::overflow_error beyond 64 bits.
std::uint64_t aux_count(int modes, int kmax);

// Graded order: by depth; within a depth, Hermitian pairs (n,m),(m,n) adjacent, pairs with
// smaller |n|-|m| first, ties broken by descending lexicographic (n,m).
std::vector<MultiIndex> enumerate_indices(int modes, int kmax);

class IndexSet {
 public:
  IndexSet(int modes, int kmax);

  int modes() const { return modes_; }
  int kmax() const { return kmax_; }
  std::size_t size() const { return idx_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return idx_[i]; }
  const std::vector<MultiIndex>& all() const { return idx_; }
  int find(const MultiIndex& mi) const;  // -1 if not retained

  // Neighbour lookups (-1 when outside the retained set or negative).
  int plus_n(int k, std::size_t i) const { return pn_[k][i]; }
  int plus_m(int k, std::size_t i) const { return pm_[k][i]; }
  int minus_n(int k, std::size_t i) const { return mn_[k][i]; }
  int minus_m(int k, std::size_t i) const { return mm_[k][i]; }
  int adjoint(std::size_t i) const { return adj_[i]; }

 private:
  int modes_, kmax_;
  std::vector<MultiIndex> idx_;
  std::map<MultiIndex, int> pos_;
  std::vector<std::vector<int>> pn_, pm_, mn_, mm_;
  std::vector<int> adj_;
};

using Hierarchy = std::vector<Mat>;

struct HierarchyState {
  std::shared_ptr<const IndexSet> set;
  Hierarchy rho;
  double time = 0.0;
  double last_lambda = 0.0;  // last finite feedback strength (dynamic rule)

  int kmax() const { return set->kmax(); }
  const Mat& physical() const { return rho[0]; }
};

// Atom-space operator with diagonal and sparse fast paths for the hot loop.
class AtomOp {
 public:
  AtomOp() = default;
  explicit AtomOp(const Mat& m);

  const Mat& dense() const { return dense_; }
  Mat lmul(const Mat& x) const;
  Mat rmul(const Mat& x) const;
  bool is_zero() const { return zero_; }

 private:
  enum class Kind { dense, diagonal, sparse };
  struct Entry {
    int r, c;
    cplx v;
  };
  Mat dense_;
  Vec diag_;
  std::vector<Entry> entries_;
  Kind kind_ = Kind::dense;
  bool zero_ = true;
};

// Exact images of left/right multiplication by cavity operators of mode k with coupling g:
// a X -> -(i/g) X(n+e,m);  a† X -> (i/g) X(n,m+e) + n (ig) X(n-e,m);
// X a† -> (i/g) X(n,m+e);  X a -> -(i/g) X(n+e,m) + m (-ig) X(n,m-e).
Hierarchy left_a(const IndexSet& s, const Hierarchy& x, int k, double g);
Hierarchy left_adag(const IndexSet& s, const Hierarchy& x, int k, double g);
Hierarchy right_a(const IndexSet& s, const Hierarchy& x, int k, double g);
Hierarchy right_adag(const IndexSet& s, const Hierarchy& x, int k, double g);
Hierarchy left_atom(const AtomOp& op, const Hierarchy& x);
Hierarchy right_atom(const AtomOp& op, const Hierarchy& x);

void axpy(Hierarchy& y, cplx alpha, const Hierarchy& x);  // y += alpha x
void scale(Hierarchy& y, cplx alpha);
Hierarchy zeros_like(const Hierarchy& x);

}  // namespace cheom
