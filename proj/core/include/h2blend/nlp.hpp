#pragma once

// Problem-evaluation contract between a transcribed optimal control problem
// and an NLP algorithm, plus the concrete row-expression problem used by the
// transcription.
//
//   min f(x)  s.t.  row_lower <= g(x) <= row_upper,  var_lower <= x <= var_upper
//
// Rows with row_lower == row_upper are equalities. Infinite bounds are
// +/- std::numeric_limits<double>::infinity().

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace h2blend {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Compressed sparse row pattern.
struct SparsePattern {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // size rows + 1
  std::vector<int> col;      // size nnz, sorted within each row

  std::size_t nnz() const { return col.size(); }
};

class NlpInterface {
 public:
  virtual ~NlpInterface() = default;

  virtual int num_variables() const = 0;
  virtual int num_rows() const = 0;

  virtual std::span<const double> var_lower() const = 0;
  virtual std::span<const double> var_upper() const = 0;
  virtual std::span<const double> row_lower() const = 0;
  virtual std::span<const double> row_upper() const = 0;

  virtual double objective(std::span<const double> x) const = 0;
  virtual void objective_gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual void rows(std::span<const double> x, std::span<double> g) const = 0;

  virtual const SparsePattern& jacobian_pattern() const = 0;
  virtual void jacobian_values(std::span<const double> x, std::span<double> values) const = 0;

  /// Lower triangle (row >= col) of the Lagrangian Hessian.
  virtual const SparsePattern& hessian_pattern() const = 0;
  /// sigma * Hess f + sum_i lambda_i Hess g_i on the pattern.
  virtual void hessian_values(std::span<const double> x, double sigma,
                              std::span<const double> lambda,
                              std::span<double> values) const = 0;
};

// ---------------------------------------------------------------------------
// Row expressions

struct LinearTerm {
  int var;
  double coef;
};

/// coef * x[a] * x[b]
struct BilinearTerm {
  int a;
  int b;
  double coef;
};

/// beta * s(phi) / rho_bar with phi = (x[f0] + x[fl]) * flux_weight,
/// rho_bar = (x[rho0] + x[rho1] + x[rho2] + x[rho3]) / 2 and
/// s(phi) = phi * sqrt(phi^2 + eps^2) (phi |phi| when eps = 0).
struct FrictionTerm {
  int f0;
  int fl;
  std::array<int, 4> rho;
  double beta;
  double flux_weight;
  double eps;
};

/// P(out)^2 - alpha^2 P(in)^2 with P = (c_base + c_slope eta)(rho_h2 + rho_ng).
/// Each triple is {eta, rho_h2, rho_ng}.
struct BoostTerm {
  std::array<int, 3> in;
  std::array<int, 3> out;
  int alpha;
  double c_base;
  double c_slope;
};

/// coef * x[flow] * (sqrt(x[ratio]) - 1)
struct RootCostTerm {
  int flow;
  int ratio;
  double coef;
};

struct Row {
  std::vector<LinearTerm> linear;
  std::vector<BilinearTerm> bilinear;
  std::vector<FrictionTerm> friction;
  std::vector<BoostTerm> boost;
  double constant = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int tag = 0;           // caller-defined row kind
  int time = -1;         // time index, -1 when not time dependent
  std::string name;
};

struct ObjectiveExpr {
  std::vector<LinearTerm> linear;
  std::vector<RootCostTerm> root_cost;
  double constant = 0.0;
};

/// Problem whose rows are sums of the term types above. Derivatives are
/// exact and assembled on a fixed sparsity pattern computed by finalize().
class ExprNlp final : public NlpInterface {
 public:
  int add_variable(std::string name, double lower, double upper);
  int add_row(Row row);
  ObjectiveExpr& objective_expr() { return objective_; }
  const ObjectiveExpr& objective_expr() const { return objective_; }

  /// Builds Jacobian and Hessian patterns. Required before any evaluation.
  void finalize();
  bool finalized() const { return finalized_; }

  int num_variables() const override { return static_cast<int>(var_lower_.size()); }
  int num_rows() const override { return static_cast<int>(rows_.size()); }
  std::span<const double> var_lower() const override { return var_lower_; }
  std::span<const double> var_upper() const override { return var_upper_; }
  std::span<const double> row_lower() const override { return row_lower_; }
  std::span<const double> row_upper() const override { return row_upper_; }

  double objective(std::span<const double> x) const override;
  void objective_gradient(std::span<const double> x, std::span<double> grad) const override;
  void rows(std::span<const double> x, std::span<double> g) const override;
  /// Single row value.
  double row_value(int r, std::span<const double> x) const;

  const SparsePattern& jacobian_pattern() const override { return jac_; }
  void jacobian_values(std::span<const double> x, std::span<double> values) const override;
  const SparsePattern& hessian_pattern() const override { return hess_; }
  void hessian_values(std::span<const double> x, double sigma, std::span<const double> lambda,
                      std::span<double> values) const override;

  const Row& row(int r) const { return rows_[static_cast<std::size_t>(r)]; }
  const std::vector<Row>& all_rows() const { return rows_; }
  const std::string& var_name(int v) const { return var_names_[static_cast<std::size_t>(v)]; }

  /// Replaces the smoothing parameter of every friction term.
  void set_friction_eps(double eps);
  /// Overrides the bounds of a variable (before or after finalize()).
  void set_variable_bounds(int v, double lower, double upper);

 private:
  std::vector<double> var_lower_;
  std::vector<double> var_upper_;
  std::vector<std::string> var_names_;
  std::vector<Row> rows_;
  std::vector<double> row_lower_;
  std::vector<double> row_upper_;
  ObjectiveExpr objective_;

  bool finalized_ = false;
  SparsePattern jac_;
  SparsePattern hess_;
  // Flattened slot tables, filled in row/term order by finalize().
  std::vector<int> jac_slots_;
  std::vector<std::size_t> jac_slot_begin_;  // per row
  std::vector<int> hess_slots_;
  std::vector<std::size_t> hess_slot_begin_;  // per row, then one for the objective
};

/// Central finite-difference check of the Jacobian and objective gradient at x.
/// Returns the largest |analytic - fd| / max(1, |analytic|).
struct DerivativeError {
  double jacobian = 0.0;
  double gradient = 0.0;
  int worst_row = -1;
  int worst_col = -1;
};
DerivativeError compare_with_central_differences(const NlpInterface& nlp,
                                                 std::span<const double> x, double step);

}  // namespace h2blend
