#pragma once

// Solution time series in physical units and their CSV form.
//
// Files written by write_solution (one row per entity and time step):
//   nodes.csv      time_h,node,rho_H2_kg_m3,rho_NG_kg_m3,eta,p_Pa,p_MPa
//   edges.csv      time_h,edge,type,from,to,f0_kg_s,fL_kg_s,gamma_L,alpha
//   transfers.csv  time_h,node,eta_s,q_s_kg_s,q_w_kg_s,g_E_MJ_s
//   objective.csv  R_e_usd,R_c_usd,total_usd,xi,horizon_h,dt_h
// Numbers carry 17 significant digits so read_solution restores them exactly.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "h2blend/transcription.hpp"

namespace h2blend {

struct NodeSeries {
  std::string id;
  std::vector<double> rho_h2;  // kg/m^3
  std::vector<double> rho_ng;  // kg/m^3
  std::vector<double> eta;
  std::vector<double> p;       // Pa
};

enum class EdgeType { pipe, compressor };
const char* edge_type_name(EdgeType type);

/// Pipe segments carry f0, fL and gamma_L; alpha is NaN. Compressors carry
/// f0 = fL = fc, gamma_L is the inlet concentration and alpha the boost ratio.
struct EdgeSeries {
  std::string id;
  EdgeType type = EdgeType::pipe;
  std::string from;
  std::string to;
  std::vector<double> f0;  // kg/s
  std::vector<double> fl;  // kg/s
  std::vector<double> gamma_l;
  std::vector<double> alpha;
};

/// Supply and withdrawal of one node. Quantities a node does not have are 0.
struct TransferSeries {
  std::string node;
  std::vector<double> eta_s;
  std::vector<double> q_s;  // kg/s
  std::vector<double> q_w;  // kg/s
  std::vector<double> g_e;  // MJ/s
};

struct SolutionTrajectory {
  double dt_h = 0.0;
  double horizon_h = 0.0;
  std::vector<double> time_h;
  std::vector<NodeSeries> nodes;
  std::vector<EdgeSeries> edges;  // pipe segments first, then compressors
  std::vector<TransferSeries> transfers;
  ObjectiveBreakdown objective;
  double xi = 0.0;

  int steps() const { return static_cast<int>(time_h.size()); }
  const NodeSeries& node(const std::string& id) const;
  const EdgeSeries& edge(const std::string& id) const;
  const TransferSeries& transfer(const std::string& node) const;
};

/// Re-dimensionalizes a primal vector of `problem`.
SolutionTrajectory extract_trajectory(const NlpProblem& problem, std::span<const double> x);

/// Inverse of extract_trajectory: the dimensionless primal vector. Throws
/// std::invalid_argument when the trajectory does not match the problem.
std::vector<double> trajectory_variables(const NlpProblem& problem,
                                         const SolutionTrajectory& trajectory);

/// Writes the four CSV files into `dir`, creating it if needed.
void write_solution(const SolutionTrajectory& trajectory, const std::filesystem::path& dir);

/// Reads files written by write_solution. Throws ParseError on malformed input.
SolutionTrajectory read_solution(const std::filesystem::path& dir);

}  // namespace h2blend
