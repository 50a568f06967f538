#pragma once

// Post-solve audits of a solution trajectory: residual re-evaluation with the
// exact |phi|, species conservation over the cycle, periodicity, flow
// direction, concentration lag and a finite-difference derivative check.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "h2blend/network.hpp"
#include "h2blend/trajectory.hpp"
#include "h2blend/transcription.hpp"

namespace h2blend {

struct AuditCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured; a check passes when value <= tolerance
  double tolerance = 0.0;
  std::string detail;
};

/// Checks decide the verdict; warnings are advisory and never fail a report.
struct AuditReport {
  std::vector<AuditCheck> checks;
  std::vector<std::string> warnings;

  bool pass() const;
  const AuditCheck* find(const std::string& name) const;
  void add(std::string name, double value, double tolerance, std::string detail = {});
  void merge(const AuditReport& other);

  std::string to_json() const;
  std::string to_text() const;
};

/// Re-evaluates every equality residual in dimensionless form with the exact
/// |phi|, the recorded pressures against the equation of state, and every
/// bound (pressure, compressor, energy, supply, concentration). One check per
/// residual or bound kind, each with the largest violation. Throws
/// std::invalid_argument when the trajectory does not match the network.
AuditReport check_feasibility(const SolutionTrajectory& trajectory, const SegmentedNetwork& segnet,
                              const Scenario& scenario, double tol);

/// Species masses over the horizon (kg). Relative errors are |in - out| over
/// the total supplied mass, or the absolute difference when nothing is supplied.
struct SpeciesBalance {
  double h2_in = 0.0;
  double h2_out = 0.0;
  double ng_in = 0.0;
  double ng_out = 0.0;
  double throughput = 0.0;
  double h2_relative = 0.0;
  double ng_relative = 0.0;

  double worst() const { return h2_relative > ng_relative ? h2_relative : ng_relative; }
};
SpeciesBalance conservation_audit(const SolutionTrajectory& trajectory,
                                  const SegmentedNetwork& segnet, const Scenario& scenario);

/// Shortest period (h) of the time-varying scenario data: T_f / gcd of the
/// sinusoid frequencies, T_f when any data is not an integer-frequency
/// sinusoid or constant.
double data_period(const Scenario& scenario);

struct PeriodicityResult {
  bool applicable = false;  // the period is shorter than the horizon and a whole number of steps
  double period_h = 0.0;
  int shift_steps = 0;
  double max_relative = 0.0;  // over all series, relative to each series' largest magnitude
  std::string worst_series;
};
PeriodicityResult periodicity(const SolutionTrajectory& trajectory, double period_h);

/// Pipe segments whose flow runs against the segment orientation at any time
/// (sign change or persistently negative), beyond `tol` kg/s.
struct FlowDirectionResult {
  std::vector<std::string> against_orientation;
  bool verified() const { return against_orientation.empty(); }
};
FlowDirectionResult flow_direction_audit(const SolutionTrajectory& trajectory, double tol = 1e-6);

struct LagResult {
  bool defined = false;
  int shift_steps = 0;  // positive: downstream lags upstream
  double lag_h = 0.0;
  double correlation = 0.0;  // normalized peak value
  std::string reason;        // why the lag is undefined
};
/// Argmax of the circular cross-correlation of the mean-removed series.
LagResult lag_between(std::span<const double> upstream, std::span<const double> downstream,
                      double dt_h);
LagResult lag_analysis(const SolutionTrajectory& trajectory, const std::string& upstream,
                       const std::string& downstream);

struct DerivativeCheckResult {
  double jacobian = 0.0;  // max |fd - analytic| / max(1, |analytic|)
  double gradient = 0.0;
  int points = 0;
  int worst_row = -1;
  int worst_col = -1;
};

/// Random point strictly inside the variable bounds, with every pipe flow at
/// least 0.2 away from zero so friction terms stay clear of the kink at phi = 0.
std::vector<double> random_interior_point(const NlpProblem& problem, std::uint64_t seed);

/// Central differences of the Jacobian and objective gradient at `n_points`
/// random interior points. Only rows in the sparsity pattern of a column are
/// differenced; a structurally zero entry with a nonzero derivative would show
/// up as a Jacobian mismatch in compare_with_central_differences instead.
DerivativeCheckResult derivative_check(const NlpProblem& problem, int n_points, double step,
                                       std::uint64_t seed = 20240501);

struct AuditOptions {
  double feasibility_tol = 1e-5;
  double conservation_tol = 1e-6;
  double periodicity_tol = 1e-4;
  bool enforce_periodicity = false;  // otherwise a periodicity miss is a warning
};

/// Feasibility, conservation, periodicity and flow-direction audits together.
AuditReport audit_solution(const SolutionTrajectory& trajectory, const SegmentedNetwork& segnet,
                           const Scenario& scenario, const AuditOptions& options);

}  // namespace h2blend
