#pragma once

// Two-stage solution strategy: the steady problem on a one-point grid, then
// the transient problem started from the steady solution replicated over the
// grid. The embedded interior-point method is the only backend; it talks to
// the problem only through NlpInterface.

#include <filesystem>
#include <string>
#include <vector>

#include "h2blend/interior_point.hpp"
#include "h2blend/nlp.hpp"
#include "h2blend/transcription.hpp"

namespace h2blend {

enum class SolveStatus { local_optimum, infeasible, iteration_limit, error };
const char* status_name(SolveStatus status);

enum class InitialPoint {
  automatic,  // cold start for steady solves, warm start for transient solves
  cold,       // ignore the warm start and use initial_point()
};

enum class Backend { interior_point };

struct SolverOptions {
  double kkt_tol = 1e-6;
  int max_iter = 3000;
  double mu_init = 0.1;
  double mu_decrease = 0.2;  // linear barrier reduction factor
  double mu_superlinear = 1.5;
  double warm_mu_init = 1e-2;
  InitialPoint initial_point = InitialPoint::automatic;
  Backend backend = Backend::interior_point;
  bool keep_log = true;

  /// Throws ConfigError unless kkt_tol > 0 and max_iter > 0.
  void validate() const;
};

struct KktResidual {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;

  double max() const;
};

struct SolveResult {
  SolveStatus status = SolveStatus::error;
  std::vector<double> x;
  std::vector<double> y;        // row multipliers
  std::vector<double> z_lower;  // variable bound multipliers
  std::vector<double> z_upper;
  double objective = 0.0;  // NLP objective (scaled)
  double constraint_violation = 0.0;
  KktResidual kkt;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool warm_started = false;
  std::string message;
  std::vector<IpmIteration> log;
};

/// First-order optimality measures at (x, y, z). The convention is
/// grad f + J^T y - z_lower + z_upper = 0; inequality rows with y < 0 sit at
/// their lower bound. Stationarity and complementarity are divided by
/// 1 + max |multiplier|; feasibility is the largest row or bound violation.
KktResidual kkt_residual(const NlpInterface& nlp, std::span<const double> x,
                         std::span<const double> y, std::span<const double> z_lower,
                         std::span<const double> z_upper);

/// Solves a problem assembled on a one-point grid from initial_point().
SolveResult solve_steady(const NlpProblem& problem, const SolverOptions& options);

/// Solves a transient problem from the replicated steady solution.
SolveResult solve_transient(const NlpProblem& problem, const SolveResult& steady,
                            const SolverOptions& options);

/// Generic entry: solves any NLP from a given start.
SolveResult solve_nlp(const NlpInterface& nlp, const IpmPoint& start, bool warm,
                      const SolverOptions& options);

/// CSV iteration log: stage,iter,objective,inf_pr,inf_du,mu,alpha_pr,alpha_du,...
void write_iteration_log(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, const SolveResult*>>& stages);

}  // namespace h2blend
