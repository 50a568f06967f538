#include "h2blend/sparse_ldl.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace h2blend {

void SparseLdl::analyze(int n, std::span<const int> col_ptr, std::span<const int> row_idx) {
  if (n < 0 || static_cast<int>(col_ptr.size()) != n + 1) {
    throw std::invalid_argument("SparseLdl::analyze: bad column pointer");
  }
  n_ = n;
  const int nnz = col_ptr[static_cast<std::size_t>(n)];

  // Fill-reducing order from the symmetric pattern.
  perm_.resize(static_cast<std::size_t>(n));
  iperm_.resize(static_cast<std::size_t>(n));
  if (n > 0) {
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(static_cast<std::size_t>(nnz));
    for (int j = 0; j < n; ++j) {
      for (int p = col_ptr[static_cast<std::size_t>(j)]; p < col_ptr[static_cast<std::size_t>(j) + 1];
           ++p) {
        trip.emplace_back(row_idx[static_cast<std::size_t>(p)], j, 1.0);
      }
    }
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> pattern(n, n);
    pattern.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> sym = pattern.selfadjointView<Eigen::Lower>();
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
    Eigen::AMDOrdering<int> ordering;
    ordering(sym, amd);
    for (int k = 0; k < n; ++k) {
      perm_[static_cast<std::size_t>(k)] = amd.indices()[k];
      iperm_[static_cast<std::size_t>(amd.indices()[k])] = k;
    }
  }

  // Permuted upper triangle: entry (i, j), i >= j, moves to (min, max) of the new indices.
  struct Entry {
    int col;
    int row;
    int slot;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::vector<char> has_diag(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    for (int p = col_ptr[static_cast<std::size_t>(j)]; p < col_ptr[static_cast<std::size_t>(j) + 1];
         ++p) {
      const int i = row_idx[static_cast<std::size_t>(p)];
      if (i < j || i >= n) throw std::invalid_argument("SparseLdl::analyze: not lower triangular");
      if (i == j) has_diag[static_cast<std::size_t>(i)] = 1;
      const int a = iperm_[static_cast<std::size_t>(i)];
      const int b = iperm_[static_cast<std::size_t>(j)];
      entries.push_back({std::max(a, b), std::min(a, b), p});
    }
  }
  if (std::find(has_diag.begin(), has_diag.end(), 0) != has_diag.end()) {
    throw std::invalid_argument("SparseLdl::analyze: missing diagonal entry");
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return x.col != y.col ? x.col < y.col : x.row < y.row;
  });
  ap_.assign(static_cast<std::size_t>(n) + 1, 0);
  ai_.clear();
  slot_map_.assign(static_cast<std::size_t>(nnz), -1);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const bool dup = k > 0 && entries[k].col == entries[k - 1].col &&
                     entries[k].row == entries[k - 1].row;
    if (!dup) {
      ai_.push_back(entries[k].row);
      ++ap_[static_cast<std::size_t>(entries[k].col) + 1];
    }
    slot_map_[static_cast<std::size_t>(entries[k].slot)] = static_cast<int>(ai_.size()) - 1;
  }
  for (int j = 0; j < n; ++j) ap_[static_cast<std::size_t>(j) + 1] += ap_[static_cast<std::size_t>(j)];
  ax_.assign(ai_.size(), 0.0);

  // Elimination tree and column counts of L.
  etree_.assign(static_cast<std::size_t>(n), -1);
  lnz_.assign(static_cast<std::size_t>(n), 0);
  std::vector<int> work(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j) {
    work[static_cast<std::size_t>(j)] = j;
    for (int p = ap_[static_cast<std::size_t>(j)]; p < ap_[static_cast<std::size_t>(j) + 1]; ++p) {
      int i = ai_[static_cast<std::size_t>(p)];
      while (work[static_cast<std::size_t>(i)] != j) {
        if (etree_[static_cast<std::size_t>(i)] == -1) etree_[static_cast<std::size_t>(i)] = j;
        ++lnz_[static_cast<std::size_t>(i)];
        work[static_cast<std::size_t>(i)] = j;
        i = etree_[static_cast<std::size_t>(i)];
      }
    }
  }
  lp_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    lp_[static_cast<std::size_t>(i) + 1] = lp_[static_cast<std::size_t>(i)] + lnz_[static_cast<std::size_t>(i)];
  }
  li_.assign(static_cast<std::size_t>(lp_.back()), 0);
  lx_.assign(static_cast<std::size_t>(lp_.back()), 0.0);
  d_.assign(static_cast<std::size_t>(n), 0.0);
  dinv_.assign(static_cast<std::size_t>(n), 0.0);
  marker_.assign(static_cast<std::size_t>(n), 0);
  yidx_.assign(static_cast<std::size_t>(n), 0);
  elim_.assign(static_cast<std::size_t>(n), 0);
  next_.assign(static_cast<std::size_t>(n), 0);
  yvals_.assign(static_cast<std::size_t>(n), 0.0);
  work_.assign(static_cast<std::size_t>(n), 0.0);
}

bool SparseLdl::factor(std::span<const double> values) {
  if (values.size() != slot_map_.size()) {
    throw std::invalid_argument("SparseLdl::factor: value count does not match pattern");
  }
  std::fill(ax_.begin(), ax_.end(), 0.0);
  for (std::size_t k = 0; k < values.size(); ++k) {
    ax_[static_cast<std::size_t>(slot_map_[k])] += values[k];
  }
  positive_ = 0;
  negative_ = 0;
  const int n = n_;
  for (int i = 0; i < n; ++i) {
    const auto is = static_cast<std::size_t>(i);
    marker_[is] = 0;
    yvals_[is] = 0.0;
    d_[is] = 0.0;
    next_[is] = lp_[is];
  }

  // Up-looking factorization: row k of L from a sparse triangular solve.
  for (int k = 0; k < n; ++k) {
    int nnz_y = 0;
    for (int p = ap_[static_cast<std::size_t>(k)]; p < ap_[static_cast<std::size_t>(k) + 1]; ++p) {
      const int b = ai_[static_cast<std::size_t>(p)];
      if (b == k) {
        d_[static_cast<std::size_t>(k)] = ax_[static_cast<std::size_t>(p)];
        continue;
      }
      yvals_[static_cast<std::size_t>(b)] = ax_[static_cast<std::size_t>(p)];
      if (marker_[static_cast<std::size_t>(b)]) continue;
      marker_[static_cast<std::size_t>(b)] = 1;
      int ne = 0;
      elim_[static_cast<std::size_t>(ne++)] = b;
      int next = etree_[static_cast<std::size_t>(b)];
      while (next != -1 && next < k) {
        if (marker_[static_cast<std::size_t>(next)]) break;
        marker_[static_cast<std::size_t>(next)] = 1;
        elim_[static_cast<std::size_t>(ne++)] = next;
        next = etree_[static_cast<std::size_t>(next)];
      }
      while (ne > 0) yidx_[static_cast<std::size_t>(nnz_y++)] = elim_[static_cast<std::size_t>(--ne)];
    }
    for (int q = nnz_y - 1; q >= 0; --q) {
      const int c = yidx_[static_cast<std::size_t>(q)];
      const auto cs = static_cast<std::size_t>(c);
      const int end = next_[cs];
      const double yc = yvals_[cs];
      for (int p = lp_[cs]; p < end; ++p) {
        yvals_[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])] -=
            lx_[static_cast<std::size_t>(p)] * yc;
      }
      li_[static_cast<std::size_t>(end)] = k;
      const double l = yc * dinv_[cs];
      lx_[static_cast<std::size_t>(end)] = l;
      d_[static_cast<std::size_t>(k)] -= yc * l;
      ++next_[cs];
      yvals_[cs] = 0.0;
      marker_[cs] = 0;
    }
    const double dk = d_[static_cast<std::size_t>(k)];
    if (dk == 0.0 || !std::isfinite(dk)) return false;
    if (dk > 0.0) {
      ++positive_;
    } else {
      ++negative_;
    }
    dinv_[static_cast<std::size_t>(k)] = 1.0 / dk;
  }
  return true;
}

void SparseLdl::solve(std::span<double> rhs) const {
  if (static_cast<int>(rhs.size()) != n_) throw std::invalid_argument("SparseLdl::solve: size");
  const auto n = static_cast<std::size_t>(n_);
  for (std::size_t k = 0; k < n; ++k) work_[k] = rhs[static_cast<std::size_t>(perm_[k])];
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = work_[i];
    for (int p = lp_[i]; p < lp_[i + 1]; ++p) {
      work_[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])] -=
          lx_[static_cast<std::size_t>(p)] * xi;
    }
  }
  for (std::size_t i = 0; i < n; ++i) work_[i] *= dinv_[i];
  for (std::size_t i = n; i-- > 0;) {
    double xi = work_[i];
    for (int p = lp_[i]; p < lp_[i + 1]; ++p) {
      xi -= lx_[static_cast<std::size_t>(p)] * work_[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])];
    }
    work_[i] = xi;
  }
  for (std::size_t k = 0; k < n; ++k) rhs[static_cast<std::size_t>(perm_[k])] = work_[k];
}

}  // namespace h2blend
