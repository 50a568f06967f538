#include "h2blend/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "h2blend/errors.hpp"

namespace h2blend {

const char* status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::local_optimum: return "local-optimum";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::iteration_limit: return "iteration-limit";
    case SolveStatus::error: return "error";
  }
  return "error";
}

void SolverOptions::validate() const {
  if (!(kkt_tol > 0.0)) throw ConfigError("solver: kkt_tol must be positive");
  if (max_iter <= 0) throw ConfigError("solver: max_iter must be positive");
  if (!(mu_init > 0.0) || !(warm_mu_init > 0.0)) {
    throw ConfigError("solver: barrier parameters must be positive");
  }
  if (!(mu_decrease > 0.0 && mu_decrease < 1.0) || !(mu_superlinear > 1.0 && mu_superlinear < 2.0)) {
    throw ConfigError("solver: barrier schedule out of range");
  }
}

double KktResidual::max() const { return std::max({stationarity, feasibility, complementarity}); }

KktResidual kkt_residual(const NlpInterface& nlp, std::span<const double> x,
                         std::span<const double> y, std::span<const double> z_lower,
                         std::span<const double> z_upper) {
  const auto n = static_cast<std::size_t>(nlp.num_variables());
  const auto m = static_cast<std::size_t>(nlp.num_rows());
  if (x.size() != n || y.size() != m || z_lower.size() != n || z_upper.size() != n) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  std::vector<double> grad(n);
  nlp.objective_gradient(x, grad);
  std::vector<double> jac(nlp.jacobian_pattern().nnz());
  nlp.jacobian_values(x, jac);
  std::vector<double> g(m);
  nlp.rows(x, g);
  const SparsePattern& jp = nlp.jacobian_pattern();
  for (std::size_t i = 0; i < m; ++i) {
    for (int k = jp.row_ptr[i]; k < jp.row_ptr[i + 1]; ++k) {
      grad[static_cast<std::size_t>(jp.col[static_cast<std::size_t>(k)])] +=
          jac[static_cast<std::size_t>(k)] * y[i];
    }
  }
  double mult = 0.0;
  for (double v : y) mult = std::max(mult, std::abs(v));
  for (std::size_t j = 0; j < n; ++j) {
    mult = std::max({mult, std::abs(z_lower[j]), std::abs(z_upper[j])});
  }
  const double scale = 1.0 + mult;

  const auto xl = nlp.var_lower();
  const auto xu = nlp.var_upper();
  const auto rl = nlp.row_lower();
  const auto ru = nlp.row_upper();
  KktResidual r;
  for (std::size_t j = 0; j < n; ++j) {
    if (xl[j] == xu[j]) continue;  // fixed variables carry no stationarity condition
    r.stationarity = std::max(r.stationarity, std::abs(grad[j] - z_lower[j] + z_upper[j]));
    r.feasibility = std::max({r.feasibility, xl[j] - x[j], x[j] - xu[j]});
    if (std::isfinite(xl[j])) {
      r.complementarity = std::max(r.complementarity, std::abs(z_lower[j] * (x[j] - xl[j])));
    }
    if (std::isfinite(xu[j])) {
      r.complementarity = std::max(r.complementarity, std::abs(z_upper[j] * (xu[j] - x[j])));
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    r.feasibility = std::max({r.feasibility, rl[i] - g[i], g[i] - ru[i]});
    if (rl[i] == ru[i]) continue;
    if (y[i] < 0.0 && std::isfinite(rl[i])) {
      r.complementarity = std::max(r.complementarity, -y[i] * std::abs(g[i] - rl[i]));
    } else if (y[i] > 0.0 && std::isfinite(ru[i])) {
      r.complementarity = std::max(r.complementarity, y[i] * std::abs(ru[i] - g[i]));
    }
  }
  r.feasibility = std::max(r.feasibility, 0.0);
  r.stationarity /= scale;
  r.complementarity /= scale;
  return r;
}

SolveResult solve_nlp(const NlpInterface& nlp, const IpmPoint& start, bool warm,
                      const SolverOptions& options) {
  options.validate();
  IpmOptions ipm;
  ipm.tol = options.kkt_tol;
  ipm.constr_viol_tol = 0.1 * options.kkt_tol;
  ipm.max_iter = options.max_iter;
  ipm.mu_init = options.mu_init;
  ipm.kappa_mu = options.mu_decrease;
  ipm.theta_mu = options.mu_superlinear;
  ipm.warm_mu_init = options.warm_mu_init;
  // Clipping onto the original bounds moves x by at most the relaxation; keep
  // that well under the primal tolerance even against O(100) Jacobian entries.
  ipm.bound_relax = std::min(1e-8, 1e-4 * options.kkt_tol);

  const auto t0 = std::chrono::steady_clock::now();
  IpmResult r = solve_interior_point(nlp, start, warm, ipm);
  const auto t1 = std::chrono::steady_clock::now();

  SolveResult out;
  out.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
  out.iterations = r.iterations;
  out.message = r.message;
  out.warm_started = warm;
  out.x = std::move(r.point.x);
  out.y = std::move(r.point.y);
  out.z_lower = std::move(r.point.z_lower);
  out.z_upper = std::move(r.point.z_upper);
  out.objective = r.objective;
  out.constraint_violation = r.constraint_violation;
  if (options.keep_log) out.log = std::move(r.log);
  switch (r.status) {
    case IpmStatus::converged: out.status = SolveStatus::local_optimum; break;
    case IpmStatus::infeasible: out.status = SolveStatus::infeasible; break;
    case IpmStatus::iteration_limit: out.status = SolveStatus::iteration_limit; break;
    case IpmStatus::failure: out.status = SolveStatus::error; break;
  }
  if (out.x.size() == static_cast<std::size_t>(nlp.num_variables()) &&
      out.y.size() == static_cast<std::size_t>(nlp.num_rows())) {
    try {
      out.kkt = kkt_residual(nlp, out.x, out.y, out.z_lower, out.z_upper);
    } catch (const EvaluationError& e) {
      out.status = SolveStatus::error;
      out.message = e.what();
    }
  }
  if (out.status == SolveStatus::local_optimum &&
      (out.kkt.max() > options.kkt_tol || out.constraint_violation > options.kkt_tol)) {
    out.status = SolveStatus::error;
    out.message = "converged point fails the KKT check after projection onto the bounds";
  }
  return out;
}

SolveResult solve_steady(const NlpProblem& problem, const SolverOptions& options) {
  if (!problem.grid.steady()) {
    throw ConfigError("solve_steady: problem is not assembled on a one-point grid");
  }
  IpmPoint start;
  start.x = initial_point(problem);
  return solve_nlp(problem.nlp, start, false, options);
}

namespace {

// Maps steady row multipliers onto the transient row order: equalities are
// time-major first, then the inequality rows, again time-major.
std::vector<double> replicate_rows(const NlpProblem& target, const std::vector<double>& y) {
  const int steps = target.grid.steps;
  const int eq = target.equalities / steps;
  const int in = target.inequalities / steps;
  std::vector<double> out(static_cast<std::size_t>(target.nlp.num_rows()), 0.0);
  if (static_cast<int>(y.size()) != eq + in) return out;
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < eq; ++k) {
      out[static_cast<std::size_t>(t * eq + k)] = y[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < in; ++k) {
      out[static_cast<std::size_t>(steps * eq + t * in + k)] = y[static_cast<std::size_t>(eq + k)];
    }
  }
  return out;
}

}  // namespace

SolveResult solve_transient(const NlpProblem& problem, const SolveResult& steady,
                            const SolverOptions& options) {
  const bool usable = static_cast<int>(steady.x.size()) == problem.index.block() &&
                      options.initial_point == InitialPoint::automatic;
  IpmPoint start;
  if (!usable) {
    start.x = initial_point(problem);
    return solve_nlp(problem.nlp, start, false, options);
  }
  start.x = replicate_steady(problem, steady.x);
  start.y = replicate_rows(problem, steady.y);
  start.z_lower = replicate_steady(problem, steady.z_lower);
  start.z_upper = replicate_steady(problem, steady.z_upper);
  SolveResult warm = solve_nlp(problem.nlp, start, true, options);
  if (warm.status == SolveStatus::local_optimum) return warm;

  // Fall back to a cold barrier start from the same primal point.
  IpmPoint cold;
  cold.x = start.x;
  SolveResult retry = solve_nlp(problem.nlp, cold, false, options);
  retry.iterations += warm.iterations;
  retry.wall_time_s += warm.wall_time_s;
  retry.message += " (after warm start: " + warm.message + ")";
  if (options.keep_log) {
    warm.log.insert(warm.log.end(), retry.log.begin(), retry.log.end());
    retry.log = std::move(warm.log);
  }
  return retry;
}

void write_iteration_log(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, const SolveResult*>>& stages) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "stage,iter,objective,inf_pr,inf_du,mu,alpha_pr,alpha_du,delta_w,ls_trials,restoration\n";
  for (const auto& [stage, result] : stages) {
    for (const IpmIteration& it : result->log) {
      out << stage << ',' << it.iter << ',' << it.objective << ',' << it.inf_pr << ','
          << it.inf_du << ',' << it.mu << ',' << it.alpha_pr << ',' << it.alpha_du << ','
          << it.delta_w << ',' << it.line_search_trials << ',' << (it.restoration ? 1 : 0)
          << '\n';
    }
  }
}

}  // namespace h2blend
