#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "h2blend/physics.hpp"

namespace h2blend {

enum class Role : unsigned {
  junction = 0,
  slack = 1u << 0,
  injection = 1u << 1,
  withdrawal = 1u << 2,
};

struct Node {
  std::string id;
  unsigned roles = 0;  // bitwise-or of Role values; 0 is a plain junction
  double p_min = 0.0;  // Pa
  double p_max = 0.0;  // Pa
  std::optional<double> p_slack;   // Pa, slack nodes
  double q_s_max = 1000.0;         // kg/s, supply bound for slack/injection nodes
  std::optional<double> ge_max;    // MJ/s, withdrawal bound mode
  std::optional<double> ge_fixed;  // MJ/s, withdrawal fixed mode
  bool auxiliary = false;          // created by pipe segmentation

  bool has(Role r) const { return (roles & static_cast<unsigned>(r)) != 0; }
  bool is_slack() const { return has(Role::slack); }
  bool is_withdrawal() const { return has(Role::withdrawal); }
  /// Slack and injection nodes both carry a supply flow q^s.
  bool is_supply() const { return has(Role::slack) || has(Role::injection); }
};

struct Pipe {
  std::string id;
  std::string from;
  std::string to;
  double length = 0.0;    // m
  double diameter = 0.0;  // m
  double lambda = 0.0;    // Darcy friction factor
  double area = 0.0;      // m^2, pi D^2 / 4 unless given
};

struct Compressor {
  std::string id;
  std::string from;
  std::string to;
  double alpha_max = 1.0;
  double fc_max = 0.0;  // kg/s
};

class Network {
 public:
  std::vector<Node> nodes;
  std::vector<Pipe> pipes;
  std::vector<Compressor> compressors;

  /// Index of node `id`, or npos.
  std::size_t node_index(std::string_view id) const;
  const Node& node(std::string_view id) const;

  /// Rebuilds the id lookup after the node list changes.
  void reindex();

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  void rebuild_lookup() const;

  mutable std::map<std::string, std::size_t, std::less<>> lookup_;
};

/// Time function over the cyclic horizon.
struct ConstantProfile {
  double value = 0.0;
};
/// eta0 + delta sin(2 pi nu t / T) with T the horizon.
struct SinusoidProfile {
  double eta0 = 0.0;
  double delta = 0.0;
  double nu = 1.0;
};
/// Piecewise constant: values[k] holds on [times[k], times[k+1]); wraps at the horizon.
struct SeriesProfile {
  std::vector<double> times;  // hours, strictly increasing, times[0] <= 0 allowed
  std::vector<double> values;
};
using Profile = std::variant<ConstantProfile, SinusoidProfile, SeriesProfile>;

/// Evaluates `profile` at time t (hours) on a horizon of `period` hours.
double evaluate_profile(const Profile& profile, double t, double period);
double profile_min(const Profile& profile);
double profile_max(const Profile& profile);

/// eta0 + delta sin(2 pi nu t / T).
double injection_profile(double eta0, double delta, double nu, double t, double period);

enum class EnergyMode { bound, fixed };

struct WithdrawalSpec {
  EnergyMode mode = EnergyMode::bound;
  Profile profile = ConstantProfile{0.0};  // MJ/s
};

struct Prices {
  double c_h2 = 1.5;       // $/kg
  double c_ng = 0.15;      // $/kg
  double c_energy = 0.01;  // $/MJ
  double zeta = 0.07;      // $/kWh
};

struct CompressorCost {
  double mu = 1.31;
  double specific_gravity = 0.505;
  double temperature = 288.7;  // K
};

struct Scenario {
  double horizon_h = 24.0;
  double dt_h = 1.0;
  double segment_length_m = 10000.0;
  std::map<std::string, Profile> injection;       // eta^s per supply node
  std::map<std::string, WithdrawalSpec> withdrawal;  // overrides node defaults
  Prices prices;
  double xi = 0.5;
  CompressorCost compressor_cost;
  GasConstants gas;
  double l0 = 1000.0;   // m
  double p0 = 1.0e6;    // Pa
  double mach = 1.0 / 300.0;

  /// eta^s of a supply node at time t. Nodes without a profile supply pure NG.
  double supply_fraction(std::string_view node, double t) const;
  /// Withdrawal energy spec of a node, falling back to the node's own fields.
  WithdrawalSpec withdrawal_spec(const Node& node) const;
  /// Scenario with every profile frozen at t = 0 on a single-step grid.
  Scenario frozen_at_start() const;
  NondimScales scales() const;
};

struct Segment {
  std::size_t pipe = 0;  // index into the original pipe list
  std::size_t index = 0;  // 1-based position along the pipe
  std::size_t count = 0;  // number of segments of the parent pipe
};

/// Network whose pipes are split into equal segments no longer than dL.
struct SegmentedNetwork {
  Network original;
  Network net;  // original nodes first, then auxiliary junctions; pipes are segments
  std::vector<Segment> segments;                        // parallel to net.pipes
  std::vector<std::vector<std::size_t>> pipe_segments;  // original pipe -> segment indices
  std::size_t original_node_count = 0;
};

/// Parses a network document (JSON, SI units). Throws ParseError with the item location.
Network parse_network(std::string_view document);
Network load_network(const std::filesystem::path& path);
std::string network_to_json(const Network& net);

Scenario parse_scenario(std::string_view document);
Scenario load_scenario(const std::filesystem::path& path);

/// Splits every pipe into ceil(L/dL) equal segments.
SegmentedNetwork segment_pipes(const Network& net, double dl);

struct Diagnostic {
  std::string code;
  std::string message;
};

/// Structural problems of the network; empty when the network is usable.
std::vector<Diagnostic> validate_topology(const Network& net);

}  // namespace h2blend
