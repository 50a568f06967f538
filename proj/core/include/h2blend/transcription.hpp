#pragma once

// Direct transcription of the cyclic optimal control problem into an NLP.
//
// Everything inside the NLP is dimensionless: densities by rho0, pressures by
// p0, flows by rho0 v0 A0, energy rates by that flow times R_NG. Variables are
// laid out time-major, one block per grid point, so a steady solution is
// replicated over a transient grid by copying its block.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "h2blend/network.hpp"
#include "h2blend/nlp.hpp"
#include "h2blend/physics.hpp"

namespace h2blend {

// ---------------------------------------------------------------------------
// Time grid

struct TimeGrid {
  int steps = 1;           // N
  double dt_h = 0.0;       // step in hours
  double horizon_h = 0.0;  // T_f

  double time(int n) const { return dt_h * n; }  // 0-based n
  /// Cyclic successor; wraps N-1 -> 0.
  int succ(int n) const { return n + 1 == steps ? 0 : n + 1; }
  double dt_seconds() const { return dt_h * 3600.0; }
  bool steady() const { return steps == 1; }
};

/// N = T_f / dt. Throws ConfigError when dt does not divide T_f.
TimeGrid build_time_grid(double horizon_h, double dt_h);

/// Forward difference (x_succ - x_n) / dt.
double cyclic_forward_difference(double x_succ, double x_n, double dt);
/// Forward differences of a sampled cyclic series with wraparound.
std::vector<double> cyclic_derivative(std::span<const double> x, double dt);

// ---------------------------------------------------------------------------
// Residual kernels on dimensionless values. The assembled NLP evaluates the
// same expressions; these are the reference implementations used by audits
// and tests.

/// Squared sound speeds relative to a0^2.
struct HatGas {
  double a2_h2 = 0.0;
  double a2_ng = 0.0;
  double r_h2 = 0.0;  // R_H2 / R_NG

  static HatGas from(const GasConstants& gas, const NondimScales& scales);
};

struct NodeValues {
  double rho_h2 = 0.0;
  double rho_ng = 0.0;
  double eta = 0.0;
};

/// a^2(eta) (rho_h2 + rho_ng), with a^2 taken from the nodal eta.
double pressure_hat(const NodeValues& v, const HatGas& gas);

struct SegmentInput {
  NodeValues from;       // inlet node at t_n
  NodeValues to;         // outlet node at t_n
  NodeValues from_next;  // inlet node at succ(t_n)
  NodeValues to_next;    // outlet node at succ(t_n)
  double f0 = 0.0;
  double fl = 0.0;
  double gamma_l = 0.0;  // outlet concentration; inlet concentration is from.eta
  double length = 0.0;   // L / l0
  double area = 0.0;     // A / A0
  double beta = 0.0;
  double kappa = 0.0;    // 1/s
  double dt_s = 0.0;     // 0 drops the storage terms (steady grid)
  double eps = 0.0;      // |phi| smoothing; 0 is exact
};

/// {H2 continuity, NG continuity, momentum}, scaled by L A / kappa.
std::array<double, 3> pipe_segment_residuals(const SegmentInput& in, const HatGas& gas);

/// p_out^2 - alpha^2 p_in^2.
double compressor_residual(double p_in, double p_out, double alpha);

struct EdgeFlow {
  double flow = 0.0;
  double eta = 0.0;  // concentration carried by this flow
};

struct BalanceInput {
  std::vector<EdgeFlow> inflows;   // arriving at the node, with their concentration
  std::vector<double> outflows;    // leaving the node, carrying the nodal eta
  double eta = 0.0;
  double eta_s = 0.0;
  double q_s = 0.0;
  double q_w = 0.0;
};

/// {H2, NG}: in - out + eta_s q_s - eta q_w and the NG analogue.
std::array<double, 2> nodal_balance_residuals(const BalanceInput& in);

/// eta (rho_h2 + rho_ng) - rho_h2.
double eta_definition_residual(const NodeValues& v);
/// a^2 rho - p_slack.
double slack_pressure_residual(const NodeValues& v, double p_slack, const HatGas& gas);
/// g - (eta R_H2 + (1 - eta) R_NG) q_w, in the units of the arguments.
double energy_residual(double eta, double q_w, double g, const GasConstants& gas);

// ---------------------------------------------------------------------------
// Variable layout

struct VariableIndex {
  int steps = 0;
  int nodes = 0;
  int segments = 0;
  int compressors = 0;
  int supplies = 0;
  int withdrawals = 0;
  std::vector<int> supply_slot;      // per node, -1 if not a supply node
  std::vector<int> withdrawal_slot;  // per node, -1 if not a withdrawal node
  std::vector<int> supply_nodes;     // slot -> node
  std::vector<int> withdrawal_nodes;

  int block() const {
    return 3 * nodes + 3 * segments + 2 * compressors + supplies + 2 * withdrawals;
  }
  int total() const { return steps * block(); }

  int rho_h2(int node, int t) const { return t * block() + node; }
  int rho_ng(int node, int t) const { return t * block() + nodes + node; }
  int eta(int node, int t) const { return t * block() + 2 * nodes + node; }
  int f0(int seg, int t) const { return t * block() + 3 * nodes + seg; }
  int fl(int seg, int t) const { return t * block() + 3 * nodes + segments + seg; }
  int gamma_l(int seg, int t) const { return t * block() + 3 * nodes + 2 * segments + seg; }
  int alpha(int c, int t) const { return t * block() + 3 * nodes + 3 * segments + c; }
  int fc(int c, int t) const {
    return t * block() + 3 * nodes + 3 * segments + compressors + c;
  }
  int qs(int node, int t) const {
    return t * block() + 3 * nodes + 3 * segments + 2 * compressors + supply_slot[node];
  }
  int qw(int node, int t) const {
    return t * block() + 3 * nodes + 3 * segments + 2 * compressors + supplies +
           withdrawal_slot[node];
  }
  int ge(int node, int t) const {
    return t * block() + 3 * nodes + 3 * segments + 2 * compressors + supplies + withdrawals +
           withdrawal_slot[node];
  }
};

enum class RowKind : int {
  continuity_h2 = 0,
  continuity_ng,
  momentum,
  compressor_boost,
  balance_h2,
  balance_ng,
  eta_definition,
  slack_pressure,
  energy,
  energy_fixed,
  pressure_bound,
};
inline constexpr int kRowKindCount = 11;
const char* row_kind_name(RowKind kind);

/// Options that change the assembled problem.
struct AssemblyOptions {
  double friction_eps = 1e-8;  // |phi| smoothing, dimensionless
};

struct NlpProblem {
  SegmentedNetwork segnet;
  Scenario scenario;
  TimeGrid grid;
  NondimScales scales;
  HatGas gas;
  VariableIndex index;
  ExprNlp nlp;

  double flow_scale = 0.0;       // kg/s per dimensionless flow
  double energy_scale = 0.0;     // MJ/s per dimensionless energy rate
  double objective_scale = 1.0;  // $ per unit of the NLP objective
  int equalities = 0;
  int inequalities = 0;

  // Resolved topology of the segmented network.
  std::vector<int> seg_from;
  std::vector<int> seg_to;
  std::vector<int> comp_from;
  std::vector<int> comp_to;
  std::vector<double> seg_beta;
  std::vector<double> seg_length;  // dimensionless
  std::vector<double> seg_area;    // dimensionless
};

/// Builds the NLP. Throws AssemblyError on inconsistent bounds or unknown ids.
NlpProblem assemble_nlp(const SegmentedNetwork& segnet, const Scenario& scenario,
                        const TimeGrid& grid, const AssemblyOptions& options = {});

/// Economic and compression parts of the objective in dollars.
struct ObjectiveBreakdown {
  double economic = 0.0;     // R_e
  double compression = 0.0;  // R_c
  double total = 0.0;        // xi R_e + (1 - xi) R_c
};
ObjectiveBreakdown evaluate_objective(const NlpProblem& problem, std::span<const double> x);

/// Starting point for a cold solve: slack pressure everywhere at the slack's
/// supply concentration, flows from a least-norm linear balance, alpha = 1.
std::vector<double> initial_point(const NlpProblem& problem);

/// Copies the single block of a steady solution onto every step of `target`.
std::vector<double> replicate_steady(const NlpProblem& target, std::span<const double> steady_x);

/// Writes nlp_variables.csv, nlp_constraints.csv and nlp_jacobian.csv.
void export_nlp_csv(const NlpProblem& problem, const std::filesystem::path& dir);

}  // namespace h2blend
