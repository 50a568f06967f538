#pragma once

// Sparse LDL^T factorization of symmetric (possibly indefinite) matrices with
// 1x1 pivots in a fixed fill-reducing order. The pivot signs give the inertia,
// which the interior-point method uses to detect nonconvexity.

#include <span>
#include <vector>

namespace h2blend {

class SparseLdl {
 public:
  /// Symbolic analysis of the lower triangle given as CSC (col_ptr, row_idx).
  /// Every diagonal entry must be present. Computes an AMD ordering.
  void analyze(int n, std::span<const int> col_ptr, std::span<const int> row_idx);

  /// Numeric factorization with values laid out like the analyzed pattern.
  /// Returns false on a zero or non-finite pivot.
  bool factor(std::span<const double> values);

  /// Solves in place with the current factors.
  void solve(std::span<double> rhs) const;

  int dimension() const { return n_; }
  int positive_pivots() const { return positive_; }
  int negative_pivots() const { return negative_; }
  std::size_t factor_nonzeros() const { return li_.size(); }

 private:
  int n_ = 0;
  std::vector<int> perm_;   // new -> old
  std::vector<int> iperm_;  // old -> new
  // Permuted upper triangle (CSC), and where each input slot lands in it.
  std::vector<int> ap_;
  std::vector<int> ai_;
  std::vector<int> slot_map_;
  std::vector<double> ax_;
  // Factors.
  std::vector<int> etree_;
  std::vector<int> lnz_;
  std::vector<int> lp_;
  std::vector<int> li_;
  std::vector<double> lx_;
  std::vector<double> d_;
  std::vector<double> dinv_;
  int positive_ = 0;
  int negative_ = 0;
  // Workspace.
  std::vector<char> marker_;
  std::vector<int> yidx_;
  std::vector<int> elim_;
  std::vector<int> next_;
  std::vector<double> yvals_;
  mutable std::vector<double> work_;
};

}  // namespace h2blend
