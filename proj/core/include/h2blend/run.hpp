#pragma once

// One end-to-end run: parse, validate, segment, assemble, solve the steady
// problem, solve the transient problem from it, audit and write outputs.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "h2blend/solver.hpp"
#include "h2blend/trajectory.hpp"
#include "h2blend/validation.hpp"

namespace h2blend {

enum class RunMode { steady, transient, validate_only };
const char* mode_name(RunMode mode);
/// "steady", "transient" or "validate-only". Throws ConfigError otherwise.
RunMode parse_mode(std::string_view text);

inline constexpr int kExitOk = 0;
inline constexpr int kExitSolverError = 1;
inline constexpr int kExitParseError = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitIterationLimit = 4;
inline constexpr int kExitAuditFailure = 5;

struct RunConfig {
  std::filesystem::path network;
  std::filesystem::path scenario;
  std::filesystem::path out_dir;  // empty: default_output_dir()
  std::optional<double> dt_h;
  std::optional<double> dl_m;
  std::optional<double> xi;
  std::optional<double> tol;
  RunMode mode = RunMode::transient;
  bool iteration_log = false;  // iterations.csv
  bool export_nlp = false;     // nlp_variables.csv, nlp_constraints.csv, nlp_jacobian.csv
  int derivative_points = 3;   // random points for the derivative audit

  /// Throws ConfigError for missing paths or overrides out of range.
  void validate() const;
};

/// $H2BLEND_OUT_DIR when set and non-empty, else "out".
std::filesystem::path default_output_dir();

struct RunOutcome {
  int exit_code = kExitSolverError;
  std::string message;
  std::filesystem::path out_dir;
  std::optional<SolveResult> steady;
  std::optional<SolveResult> transient;
  std::optional<SolutionTrajectory> trajectory;
  AuditReport audit;
  int variables = 0;
  int equalities = 0;
  int inequalities = 0;
};

/// Runs `config`; progress goes to `log`. Never throws for bad input: errors
/// map to exit codes 2 (parse or configuration), 3 (infeasible), 4 (iteration
/// limit), 5 (audit failure) and 1 (solver or I/O error).
///
/// Files written to the output directory: nodes.csv, edges.csv,
/// transfers.csv, objective.csv, audit.json, audit.txt and summary.json, plus
/// iterations.csv and the nlp_*.csv export on request. None contain timings,
/// so identical runs produce identical files.
RunOutcome run(const RunConfig& config, std::ostream& log);

}  // namespace h2blend
