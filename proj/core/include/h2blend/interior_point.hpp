#pragma once

// Primal-dual interior-point method with a filter line search for
//
//   min f(x)  s.t.  c_L <= g(x) <= c_U,  x_L <= x <= x_U.
//
// Inequality rows get slack variables s with g(x) - s = 0. Newton steps come
// from the symmetric indefinite KKT system, factored by SparseLdl, with inertia
// correction when the reduced Hessian is not positive definite.

#include <functional>
#include <string>
#include <vector>

#include "h2blend/nlp.hpp"

namespace h2blend {

struct IpmOptions {
  double tol = 1e-6;             // scaled optimality error at termination
  double constr_viol_tol = 1e-6;  // unscaled max constraint violation at termination
  int max_iter = 3000;
  double mu_init = 0.1;
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  double kappa_eps = 10.0;
  double tau_min = 0.99;
  double bound_push = 1e-2;
  double bound_frac = 1e-2;
  double warm_mu_init = 1e-2;
  double warm_bound_push = 1e-3;
  int max_restoration_iter = 200;
  double bound_relax = 1e-8;
  double delta_c = 1e-8;       // static dual regularization
  double delta_w_min = 1e-20;  // smallest nonzero primal regularization
  double delta_w_init = 1e-4;
  int max_soc = 4;
  int refinement_steps = 3;
  double s_max = 100.0;
};

/// Iterate in the caller's variables: x, one multiplier per row, and bound
/// multipliers for x (z_lower, z_upper >= 0, zero for infinite bounds).
struct IpmPoint {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z_lower;
  std::vector<double> z_upper;
};

enum class IpmStatus { converged, infeasible, iteration_limit, failure };

struct IpmIteration {
  int iter = 0;
  double objective = 0.0;
  double inf_pr = 0.0;  // max constraint violation
  double inf_du = 0.0;  // max scaled stationarity error
  double mu = 0.0;
  double alpha_pr = 0.0;
  double alpha_du = 0.0;
  double delta_w = 0.0;
  int line_search_trials = 0;
  bool restoration = false;
};

struct IpmResult {
  IpmStatus status = IpmStatus::failure;
  IpmPoint point;
  double objective = 0.0;
  double constraint_violation = 0.0;
  double optimality_error = 0.0;
  int iterations = 0;
  std::string message;
  std::vector<IpmIteration> log;
};

/// Runs the method from `start`. When `warm` is set, z and y are taken from
/// `start` and only a small bound push is applied.
IpmResult solve_interior_point(const NlpInterface& nlp, const IpmPoint& start, bool warm,
                               const IpmOptions& options);

}  // namespace h2blend
