#include "h2blend/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "h2blend/errors.hpp"

namespace h2blend {

namespace {

using Pair = std::pair<int, int>;  // (row, col) with row >= col

Pair lower(int a, int b) { return a >= b ? Pair{a, b} : Pair{b, a}; }

// Local derivative kernels. `grad` has k entries, `hess` is k x k row-major.

constexpr int kFrictionLocal = 6;
constexpr int kBoostLocal = 7;
constexpr int kRootLocal = 2;

std::array<int, kFrictionLocal> locals(const FrictionTerm& t) {
  return {t.f0, t.fl, t.rho[0], t.rho[1], t.rho[2], t.rho[3]};
}
std::array<int, kBoostLocal> locals(const BoostTerm& t) {
  return {t.in[0], t.in[1], t.in[2], t.out[0], t.out[1], t.out[2], t.alpha};
}
std::array<int, kRootLocal> locals(const RootCostTerm& t) { return {t.flow, t.ratio}; }

double at(std::span<const double> x, int v) { return x[static_cast<std::size_t>(v)]; }

double friction_eval(const FrictionTerm& t, std::span<const double> x, double* grad,
                     double* hess) {
  const double phi = (at(x, t.f0) + at(x, t.fl)) * t.flux_weight;
  const double rho_bar =
      0.5 * (at(x, t.rho[0]) + at(x, t.rho[1]) + at(x, t.rho[2]) + at(x, t.rho[3]));
  if (!(rho_bar > 0.0)) {
    throw EvaluationError("friction term: mean density is not positive");
  }
  const double r2 = phi * phi + t.eps * t.eps;
  const double root = std::sqrt(r2);
  const double s = phi * root;
  const double value = t.beta * s / rho_bar;
  if (grad == nullptr) return value;

  // s'(phi) and s''(phi); at eps = 0 these are 2|phi| and 2 sign(phi).
  double ds;
  double d2s;
  if (root > 0.0) {
    ds = root + phi * phi / root;
    d2s = phi * (2.0 * phi * phi + 3.0 * t.eps * t.eps) / (r2 * root);
  } else {
    ds = 0.0;
    d2s = 0.0;
  }
  const double w = t.flux_weight;
  const double df = t.beta * ds * w / rho_bar;
  const double dr = -0.5 * t.beta * s / (rho_bar * rho_bar);
  grad[0] = df;
  grad[1] = df;
  for (int k = 2; k < 6; ++k) grad[k] = dr;
  if (hess == nullptr) return value;

  const double hff = t.beta * d2s * w * w / rho_bar;
  const double hfr = -0.5 * t.beta * ds * w / (rho_bar * rho_bar);
  const double hrr = 0.5 * t.beta * s / (rho_bar * rho_bar * rho_bar);
  for (int p = 0; p < 6; ++p) {
    for (int q = 0; q < 6; ++q) {
      const bool pf = p < 2;
      const bool qf = q < 2;
      hess[p * 6 + q] = pf && qf ? hff : (pf != qf ? hfr : hrr);
    }
  }
  return value;
}

double boost_eval(const BoostTerm& t, std::span<const double> x, double* grad, double* hess) {
  auto pressure = [&](const std::array<int, 3>& v, double* dp) {
    const double eta = at(x, v[0]);
    const double rho = at(x, v[1]) + at(x, v[2]);
    const double a2 = t.c_base + t.c_slope * eta;
    if (dp != nullptr) {
      dp[0] = t.c_slope * rho;
      dp[1] = a2;
      dp[2] = a2;
    }
    return a2 * rho;
  };
  double dpi[3];
  double dpo[3];
  const double pi = pressure(t.in, dpi);
  const double po = pressure(t.out, dpo);
  const double alpha = at(x, t.alpha);
  const double value = po * po - alpha * alpha * pi * pi;
  if (grad == nullptr) return value;

  for (int k = 0; k < 3; ++k) {
    grad[k] = -2.0 * alpha * alpha * pi * dpi[k];
    grad[3 + k] = 2.0 * po * dpo[k];
  }
  grad[6] = -2.0 * alpha * pi * pi;
  if (hess == nullptr) return value;

  std::fill(hess, hess + 49, 0.0);
  auto h = [&](int p, int q) -> double& { return hess[p * 7 + q]; };
  // Hess of P is c_slope in the (eta, rho_h2) and (eta, rho_ng) positions.
  const double a2 = alpha * alpha;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      h(p, q) = -2.0 * a2 * dpi[p] * dpi[q];
      h(3 + p, 3 + q) = 2.0 * dpo[p] * dpo[q];
    }
  }
  for (int k = 1; k < 3; ++k) {
    h(0, k) += -2.0 * a2 * pi * t.c_slope;
    h(k, 0) += -2.0 * a2 * pi * t.c_slope;
    h(3, 3 + k) += 2.0 * po * t.c_slope;
    h(3 + k, 3) += 2.0 * po * t.c_slope;
  }
  for (int p = 0; p < 3; ++p) {
    h(p, 6) = -4.0 * alpha * pi * dpi[p];
    h(6, p) = h(p, 6);
  }
  h(6, 6) = -2.0 * pi * pi;
  return value;
}

double root_eval(const RootCostTerm& t, std::span<const double> x, double* grad, double* hess) {
  const double f = at(x, t.flow);
  const double a = at(x, t.ratio);
  if (!(a > 0.0)) throw EvaluationError("compression cost: non-positive ratio");
  const double sa = std::sqrt(a);
  const double value = t.coef * f * (sa - 1.0);
  if (grad == nullptr) return value;
  grad[0] = t.coef * (sa - 1.0);
  grad[1] = t.coef * f / (2.0 * sa);
  if (hess == nullptr) return value;
  hess[0] = 0.0;
  hess[1] = t.coef / (2.0 * sa);
  hess[2] = hess[1];
  hess[3] = -t.coef * f / (4.0 * a * sa);
  return value;
}

template <std::size_t K, typename Term>
void collect_pairs(const Term& term, std::vector<Pair>& pairs) {
  const auto v = locals(term);
  for (std::size_t p = 0; p < K; ++p) {
    for (std::size_t q = 0; q <= p; ++q) pairs.push_back(lower(v[p], v[q]));
  }
}

int slot_of(const SparsePattern& pat, int r, int c) {
  const auto begin = pat.col.begin() + pat.row_ptr[static_cast<std::size_t>(r)];
  const auto end = pat.col.begin() + pat.row_ptr[static_cast<std::size_t>(r) + 1];
  auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) throw std::logic_error("ExprNlp: pattern slot missing");
  return static_cast<int>(it - pat.col.begin());
}

SparsePattern build_pattern(int rows, int cols, std::vector<Pair> entries) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  SparsePattern pat;
  pat.rows = rows;
  pat.cols = cols;
  pat.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
  pat.col.reserve(entries.size());
  for (const auto& [r, c] : entries) {
    ++pat.row_ptr[static_cast<std::size_t>(r) + 1];
    pat.col.push_back(c);
  }
  for (int r = 0; r < rows; ++r) {
    pat.row_ptr[static_cast<std::size_t>(r) + 1] += pat.row_ptr[static_cast<std::size_t>(r)];
  }
  return pat;
}

// Scatter a dense local Hessian (weighted) into the slots of one term.
template <std::size_t K>
void scatter_hessian(const std::array<int, K>& v, const double* hloc, double weight,
                     const int*& slot, std::span<double> values) {
  for (std::size_t p = 0; p < K; ++p) {
    for (std::size_t q = 0; q <= p; ++q) {
      double h = hloc[p * K + q];
      if (p != q && v[p] == v[q]) h *= 2.0;
      values[static_cast<std::size_t>(*slot++)] += weight * h;
    }
  }
}

}  // namespace

int ExprNlp::add_variable(std::string name, double lower, double upper) {
  if (lower > upper) {
    throw AssemblyError("variable " + name + ": lower bound exceeds upper bound");
  }
  var_lower_.push_back(lower);
  var_upper_.push_back(upper);
  var_names_.push_back(std::move(name));
  finalized_ = false;
  return static_cast<int>(var_lower_.size()) - 1;
}

int ExprNlp::add_row(Row row) {
  if (row.lower > row.upper) {
    throw AssemblyError("row " + row.name + ": lower bound exceeds upper bound");
  }
  row_lower_.push_back(row.lower);
  row_upper_.push_back(row.upper);
  rows_.push_back(std::move(row));
  finalized_ = false;
  return static_cast<int>(rows_.size()) - 1;
}

void ExprNlp::set_friction_eps(double eps) {
  for (Row& r : rows_) {
    for (FrictionTerm& f : r.friction) f.eps = eps;
  }
}

void ExprNlp::set_variable_bounds(int v, double lower, double upper) {
  if (lower > upper) throw AssemblyError("variable " + var_name(v) + ": crossed bounds");
  var_lower_[static_cast<std::size_t>(v)] = lower;
  var_upper_[static_cast<std::size_t>(v)] = upper;
}

void ExprNlp::finalize() {
  const int n = num_variables();
  const int m = num_rows();
  auto check = [n](int v) {
    if (v < 0 || v >= n) throw AssemblyError("ExprNlp: term references unknown variable");
  };

  // Jacobian pattern.
  std::vector<Pair> jac_entries;
  std::vector<Pair> hess_entries;
  for (int r = 0; r < m; ++r) {
    const Row& row = rows_[static_cast<std::size_t>(r)];
    for (const auto& t : row.linear) {
      check(t.var);
      jac_entries.emplace_back(r, t.var);
    }
    for (const auto& t : row.bilinear) {
      check(t.a);
      check(t.b);
      jac_entries.emplace_back(r, t.a);
      jac_entries.emplace_back(r, t.b);
      hess_entries.push_back(lower(t.a, t.b));
    }
    for (const auto& t : row.friction) {
      for (int v : locals(t)) {
        check(v);
        jac_entries.emplace_back(r, v);
      }
      collect_pairs<kFrictionLocal>(t, hess_entries);
    }
    for (const auto& t : row.boost) {
      for (int v : locals(t)) {
        check(v);
        jac_entries.emplace_back(r, v);
      }
      collect_pairs<kBoostLocal>(t, hess_entries);
    }
  }
  for (const auto& t : objective_.linear) check(t.var);
  for (const auto& t : objective_.root_cost) {
    check(t.flow);
    check(t.ratio);
    collect_pairs<kRootLocal>(t, hess_entries);
  }
  jac_ = build_pattern(m, n, std::move(jac_entries));
  hess_ = build_pattern(n, n, std::move(hess_entries));

  // Slot tables in evaluation order.
  jac_slots_.clear();
  jac_slot_begin_.assign(static_cast<std::size_t>(m) + 1, 0);
  hess_slots_.clear();
  hess_slot_begin_.assign(static_cast<std::size_t>(m) + 2, 0);
  for (int r = 0; r < m; ++r) {
    const Row& row = rows_[static_cast<std::size_t>(r)];
    jac_slot_begin_[static_cast<std::size_t>(r)] = jac_slots_.size();
    hess_slot_begin_[static_cast<std::size_t>(r)] = hess_slots_.size();
    for (const auto& t : row.linear) jac_slots_.push_back(slot_of(jac_, r, t.var));
    for (const auto& t : row.bilinear) {
      jac_slots_.push_back(slot_of(jac_, r, t.a));
      jac_slots_.push_back(slot_of(jac_, r, t.b));
      const Pair pr = lower(t.a, t.b);
      hess_slots_.push_back(slot_of(hess_, pr.first, pr.second));
    }
    auto nonlinear = [&](const auto& v) {
      for (int var : v) jac_slots_.push_back(slot_of(jac_, r, var));
      for (std::size_t p = 0; p < v.size(); ++p) {
        for (std::size_t q = 0; q <= p; ++q) {
          const Pair pr = lower(v[p], v[q]);
          hess_slots_.push_back(slot_of(hess_, pr.first, pr.second));
        }
      }
    };
    for (const auto& t : row.friction) nonlinear(locals(t));
    for (const auto& t : row.boost) nonlinear(locals(t));
  }
  jac_slot_begin_[static_cast<std::size_t>(m)] = jac_slots_.size();
  hess_slot_begin_[static_cast<std::size_t>(m)] = hess_slots_.size();
  for (const auto& t : objective_.root_cost) {
    const auto v = locals(t);
    for (std::size_t p = 0; p < v.size(); ++p) {
      for (std::size_t q = 0; q <= p; ++q) {
        const Pair pr = lower(v[p], v[q]);
        hess_slots_.push_back(slot_of(hess_, pr.first, pr.second));
      }
    }
  }
  hess_slot_begin_[static_cast<std::size_t>(m) + 1] = hess_slots_.size();
  finalized_ = true;
}

double ExprNlp::objective(std::span<const double> x) const {
  double f = objective_.constant;
  for (const auto& t : objective_.linear) f += t.coef * at(x, t.var);
  for (const auto& t : objective_.root_cost) f += root_eval(t, x, nullptr, nullptr);
  return f;
}

void ExprNlp::objective_gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (const auto& t : objective_.linear) grad[static_cast<std::size_t>(t.var)] += t.coef;
  double g[kRootLocal];
  for (const auto& t : objective_.root_cost) {
    root_eval(t, x, g, nullptr);
    grad[static_cast<std::size_t>(t.flow)] += g[0];
    grad[static_cast<std::size_t>(t.ratio)] += g[1];
  }
}

double ExprNlp::row_value(int r, std::span<const double> x) const {
  const Row& row = rows_[static_cast<std::size_t>(r)];
  double v = row.constant;
  for (const auto& t : row.linear) v += t.coef * at(x, t.var);
  for (const auto& t : row.bilinear) v += t.coef * at(x, t.a) * at(x, t.b);
  for (const auto& t : row.friction) v += friction_eval(t, x, nullptr, nullptr);
  for (const auto& t : row.boost) v += boost_eval(t, x, nullptr, nullptr);
  return v;
}

void ExprNlp::rows(std::span<const double> x, std::span<double> g) const {
  for (int r = 0; r < num_rows(); ++r) g[static_cast<std::size_t>(r)] = row_value(r, x);
}

void ExprNlp::jacobian_values(std::span<const double> x, std::span<double> values) const {
  if (!finalized_) throw std::logic_error("ExprNlp::jacobian_values before finalize()");
  std::fill(values.begin(), values.end(), 0.0);
  const int* slot = jac_slots_.data();
  auto add = [&](double v) { values[static_cast<std::size_t>(*slot++)] += v; };
  double grad[kBoostLocal];
  for (const Row& row : rows_) {
    for (const auto& t : row.linear) add(t.coef);
    for (const auto& t : row.bilinear) {
      add(t.coef * at(x, t.b));
      add(t.coef * at(x, t.a));
    }
    for (const auto& t : row.friction) {
      friction_eval(t, x, grad, nullptr);
      for (int k = 0; k < kFrictionLocal; ++k) add(grad[k]);
    }
    for (const auto& t : row.boost) {
      boost_eval(t, x, grad, nullptr);
      for (int k = 0; k < kBoostLocal; ++k) add(grad[k]);
    }
  }
}

void ExprNlp::hessian_values(std::span<const double> x, double sigma,
                             std::span<const double> lambda, std::span<double> values) const {
  if (!finalized_) throw std::logic_error("ExprNlp::hessian_values before finalize()");
  std::fill(values.begin(), values.end(), 0.0);
  const int* slot = hess_slots_.data();
  double grad[kBoostLocal];
  double hloc[kBoostLocal * kBoostLocal];
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const Row& row = rows_[r];
    const double w = lambda[r];
    for (const auto& t : row.bilinear) {
      const double h = t.a == t.b ? 2.0 * t.coef : t.coef;
      values[static_cast<std::size_t>(*slot++)] += w * h;
    }
    for (const auto& t : row.friction) {
      friction_eval(t, x, grad, hloc);
      scatter_hessian(locals(t), hloc, w, slot, values);
    }
    for (const auto& t : row.boost) {
      boost_eval(t, x, grad, hloc);
      scatter_hessian(locals(t), hloc, w, slot, values);
    }
  }
  for (const auto& t : objective_.root_cost) {
    root_eval(t, x, grad, hloc);
    scatter_hessian(locals(t), hloc, sigma, slot, values);
  }
}

DerivativeError compare_with_central_differences(const NlpInterface& nlp,
                                                 std::span<const double> x0, double step) {
  const int n = nlp.num_variables();
  const int m = nlp.num_rows();
  const SparsePattern& pat = nlp.jacobian_pattern();
  std::vector<double> jac(pat.nnz());
  nlp.jacobian_values(x0, jac);
  std::vector<double> grad(static_cast<std::size_t>(n));
  nlp.objective_gradient(x0, grad);

  // Column-wise lookup of the analytic Jacobian.
  std::vector<std::vector<std::pair<int, double>>> by_col(static_cast<std::size_t>(n));
  for (int r = 0; r < m; ++r) {
    for (int k = pat.row_ptr[static_cast<std::size_t>(r)];
         k < pat.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
      by_col[static_cast<std::size_t>(pat.col[static_cast<std::size_t>(k)])].emplace_back(
          r, jac[static_cast<std::size_t>(k)]);
    }
  }

  DerivativeError err;
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> gp(static_cast<std::size_t>(m));
  std::vector<double> gm(static_cast<std::size_t>(m));
  std::vector<double> analytic(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const double xj = x[js];
    x[js] = xj + step;
    nlp.rows(x, gp);
    const double fp = nlp.objective(x);
    x[js] = xj - step;
    nlp.rows(x, gm);
    const double fm = nlp.objective(x);
    x[js] = xj;

    const double gfd = (fp - fm) / (2.0 * step);
    err.gradient = std::max(err.gradient, std::abs(gfd - grad[js]) / std::max(1.0, std::abs(grad[js])));

    std::fill(analytic.begin(), analytic.end(), 0.0);
    for (const auto& [r, v] : by_col[js]) analytic[static_cast<std::size_t>(r)] = v;
    for (int r = 0; r < m; ++r) {
      const auto rs = static_cast<std::size_t>(r);
      const double fd = (gp[rs] - gm[rs]) / (2.0 * step);
      const double e = std::abs(fd - analytic[rs]) / std::max(1.0, std::abs(analytic[rs]));
      if (e > err.jacobian) {
        err.jacobian = e;
        err.worst_row = r;
        err.worst_col = j;
      }
    }
  }
  return err;
}

}  // namespace h2blend
