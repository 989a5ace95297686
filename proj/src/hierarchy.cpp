#include "cheom/hierarchy.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cheom {

int MultiIndex::depth() const {
  return std::accumulate(n.begin(), n.end(), 0) + std::accumulate(m.begin(), m.end(), 0);
}

std::uint64_t aux_count(int modes, int kmax) {
  if (modes < 1 || kmax < 0) throw std::invalid_argument("aux_count: need modes >= 1 and kmax >= 0");
  // C(2M + k, k) built incrementally; each partial product is itself a binomial coefficient.
  unsigned __int128 c = 1;
  const std::uint64_t n = 2 * static_cast<std::uint64_t>(modes);
  for (std::uint64_t i = 1; i <= static_cast<std::uint64_t>(kmax); ++i) {
    c = c * (n + i) / i;
    if (c > static_cast<unsigned __int128>(UINT64_MAX)) throw std::overflow_error("aux_count: K overflows 64 bits");
  }
  return static_cast<std::uint64_t>(c);
}

namespace {

void compositions(int parts, int total, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = total; v >= 0; --v) {
    cur.push_back(v);
    compositions(parts - 1, total - v, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_indices(int modes, int kmax) {
  const std::uint64_t expected = aux_count(modes, kmax);
  if (expected > 50'000'000ULL) throw std::overflow_error("enumerate_indices: K too large to materialize");
  std::vector<MultiIndex> out;
  out.reserve(expected);
  for (int d = 0; d <= kmax; ++d) {
    std::vector<std::vector<int>> flat;
    std::vector<int> cur;
    compositions(2 * modes, d, cur, flat);
    std::vector<MultiIndex> reps;
    for (const auto& f : flat) {
      MultiIndex mi{{f.begin(), f.begin() + modes}, {f.begin() + modes, f.end()}};
      // representative of the Hermitian pair: n >= m lexicographically
      if (!(mi.n < mi.m)) reps.push_back(mi);
    }
    auto imbalance = [](const MultiIndex& a) {
      return std::accumulate(a.n.begin(), a.n.end(), 0) - std::accumulate(a.m.begin(), a.m.end(), 0);
    };
    std::stable_sort(reps.begin(), reps.end(), [&](const MultiIndex& a, const MultiIndex& b) {
      return imbalance(a) < imbalance(b);
    });
    for (const auto& r : reps) {
      out.push_back(r);
      if (r.n != r.m) out.push_back(MultiIndex{r.m, r.n});
    }
  }
  if (out.size() != expected) throw std::logic_error("enumerate_indices: count mismatch");
  return out;
}

IndexSet::IndexSet(int modes, int kmax) : modes_(modes), kmax_(kmax), idx_(enumerate_indices(modes, kmax)) {
  for (std::size_t i = 0; i < idx_.size(); ++i) pos_[idx_[i]] = static_cast<int>(i);
  auto shifted = [&](std::size_t i, int k, int dn, int dm) {
    MultiIndex mi = idx_[i];
    mi.n[k] += dn;
    mi.m[k] += dm;
    if (mi.n[k] < 0 || mi.m[k] < 0) return -1;
    return find(mi);
  };
  pn_.assign(modes, std::vector<int>(idx_.size()));
  pm_ = mn_ = mm_ = pn_;
  adj_.resize(idx_.size());
  for (int k = 0; k < modes; ++k)
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      pn_[k][i] = shifted(i, k, 1, 0);
      pm_[k][i] = shifted(i, k, 0, 1);
      mn_[k][i] = shifted(i, k, -1, 0);
      mm_[k][i] = shifted(i, k, 0, -1);
    }
  for (std::size_t i = 0; i < idx_.size(); ++i) adj_[i] = find(MultiIndex{idx_[i].m, idx_[i].n});
}

int IndexSet::find(const MultiIndex& mi) const {
  auto it = pos_.find(mi);
  return it == pos_.end() ? -1 : it->second;
}

AtomOp::AtomOp(const Mat& m) : dense_(m) {
  zero_ = m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0;
  const Eigen::Index nnz = (m.array() != cplx(0.0)).count();
  const Eigen::Index nd = (m.diagonal().array() != cplx(0.0)).count();
  if (m.rows() >= 4 && nnz == nd) {
    diag_ = m.diagonal();
    kind_ = Kind::diagonal;
  } else if (m.rows() >= 8 && static_cast<double>(nnz) < 0.3 * static_cast<double>(m.size())) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        if (m(r, c) != cplx(0.0)) entries_.push_back({static_cast<int>(r), static_cast<int>(c), m(r, c)});
    kind_ = Kind::sparse;
  }
}

Mat AtomOp::lmul(const Mat& x) const {
  switch (kind_) {
    case Kind::diagonal:
      return diag_.asDiagonal() * x;
    case Kind::sparse: {
      Mat y = Mat::Zero(dense_.rows(), x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (const auto& e : entries_) y(e.r, j) += e.v * x(e.c, j);
      return y;
    }
    default:
      return dense_ * x;
  }
}

Mat AtomOp::rmul(const Mat& x) const {
  switch (kind_) {
    case Kind::diagonal:
      return x * diag_.asDiagonal();
    case Kind::sparse: {
      Mat y = Mat::Zero(x.rows(), dense_.cols());
      for (const auto& e : entries_) y.col(e.c) += e.v * x.col(e.r);
      return y;
    }
    default:
      return x * dense_;
  }
}

Hierarchy zeros_like(const Hierarchy& x) {
  Hierarchy y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = Mat::Zero(x[i].rows(), x[i].cols());
  return y;
}

Hierarchy left_a(const IndexSet& s, const Hierarchy& x, int k, double g) {
  Hierarchy y = zeros_like(x);
  if (g == 0.0) return y;
  const cplx f = -I1 / g;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (int j = s.plus_n(k, i); j >= 0) y[i] = f * x[j];
  return y;
}

Hierarchy left_adag(const IndexSet& s, const Hierarchy& x, int k, double g) {
  Hierarchy y = zeros_like(x);
  if (g == 0.0) return y;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (int j = s.plus_m(k, i); j >= 0) y[i] += (I1 / g) * x[j];
    if (int j = s.minus_n(k, i); j >= 0) y[i] += (static_cast<double>(s[i].n[k]) * g * I1) * x[j];
  }
  return y;
}

Hierarchy right_adag(const IndexSet& s, const Hierarchy& x, int k, double g) {
  Hierarchy y = zeros_like(x);
  if (g == 0.0) return y;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (int j = s.plus_m(k, i); j >= 0) y[i] = (I1 / g) * x[j];
  return y;
}

Hierarchy right_a(const IndexSet& s, const Hierarchy& x, int k, double g) {
  Hierarchy y = zeros_like(x);
  if (g == 0.0) return y;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (int j = s.plus_n(k, i); j >= 0) y[i] += (-I1 / g) * x[j];
    if (int j = s.minus_m(k, i); j >= 0) y[i] += (-static_cast<double>(s[i].m[k]) * g * I1) * x[j];
  }
  return y;
}

Hierarchy left_atom(const AtomOp& op, const Hierarchy& x) {
  Hierarchy y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = op.lmul(x[i]);
  return y;
}

Hierarchy right_atom(const AtomOp& op, const Hierarchy& x) {
  Hierarchy y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = op.rmul(x[i]);
  return y;
}

void axpy(Hierarchy& y, cplx alpha, const Hierarchy& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void scale(Hierarchy& y, cplx alpha) {
  for (auto& m : y) m *= alpha;
}

}  // namespace cheom
