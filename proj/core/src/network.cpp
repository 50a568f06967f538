#include "h2blend/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "h2blend/errors.hpp"

namespace h2blend {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Network

std::size_t Network::node_index(std::string_view id) const {
  if (lookup_.size() != nodes.size()) {
    // Nodes were appended without reindex().
    rebuild_lookup();
  }
  auto it = lookup_.find(id);
  return it == lookup_.end() ? npos : it->second;
}

const Node& Network::node(std::string_view id) const {
  const std::size_t k = node_index(id);
  if (k == npos) {
    throw std::out_of_range("unknown node '" + std::string(id) + "'");
  }
  return nodes[k];
}

void Network::reindex() { rebuild_lookup(); }

void Network::rebuild_lookup() const {
  lookup_.clear();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    lookup_.emplace(nodes[k].id, k);
  }
}

// ---------------------------------------------------------------------------
// Profiles

double injection_profile(double eta0, double delta, double nu, double t, double period) {
  return eta0 + delta * std::sin(2.0 * std::numbers::pi * nu * t / period);
}

double evaluate_profile(const Profile& profile, double t, double period) {
  struct Visitor {
    double t;
    double period;
    double operator()(const ConstantProfile& p) const { return p.value; }
    double operator()(const SinusoidProfile& p) const {
      return injection_profile(p.eta0, p.delta, p.nu, t, period);
    }
    double operator()(const SeriesProfile& p) const {
      double tw = std::fmod(t, period);
      if (tw < 0.0) tw += period;
      // Last sample whose start time is <= tw; before the first sample the
      // series wraps around to its final value.
      auto it = std::upper_bound(p.times.begin(), p.times.end(), tw + 1e-12);
      if (it == p.times.begin()) return p.values.back();
      return p.values[static_cast<std::size_t>(it - p.times.begin()) - 1];
    }
  };
  return std::visit(Visitor{t, period}, profile);
}

double profile_min(const Profile& profile) {
  struct Visitor {
    double operator()(const ConstantProfile& p) const { return p.value; }
    double operator()(const SinusoidProfile& p) const { return p.eta0 - std::abs(p.delta); }
    double operator()(const SeriesProfile& p) const {
      return *std::min_element(p.values.begin(), p.values.end());
    }
  };
  return std::visit(Visitor{}, profile);
}

double profile_max(const Profile& profile) {
  struct Visitor {
    double operator()(const ConstantProfile& p) const { return p.value; }
    double operator()(const SinusoidProfile& p) const { return p.eta0 + std::abs(p.delta); }
    double operator()(const SeriesProfile& p) const {
      return *std::max_element(p.values.begin(), p.values.end());
    }
  };
  return std::visit(Visitor{}, profile);
}

// ---------------------------------------------------------------------------
// Scenario

double Scenario::supply_fraction(std::string_view node, double t) const {
  auto it = injection.find(std::string(node));
  if (it == injection.end()) return 0.0;
  return evaluate_profile(it->second, t, horizon_h);
}

WithdrawalSpec Scenario::withdrawal_spec(const Node& node) const {
  auto it = withdrawal.find(node.id);
  if (it != withdrawal.end()) return it->second;
  WithdrawalSpec spec;
  if (node.ge_fixed) {
    spec.mode = EnergyMode::fixed;
    spec.profile = ConstantProfile{*node.ge_fixed};
  } else {
    spec.mode = EnergyMode::bound;
    spec.profile = ConstantProfile{node.ge_max.value_or(0.0)};
  }
  return spec;
}

Scenario Scenario::frozen_at_start() const {
  Scenario s = *this;
  s.dt_h = s.horizon_h;
  for (auto& [id, prof] : s.injection) {
    prof = ConstantProfile{evaluate_profile(prof, 0.0, horizon_h)};
  }
  for (auto& [id, spec] : s.withdrawal) {
    spec.profile = ConstantProfile{evaluate_profile(spec.profile, 0.0, horizon_h)};
  }
  return s;
}

NondimScales Scenario::scales() const { return nondim_scales(l0, p0, mach, gas); }

// ---------------------------------------------------------------------------
// Parsing helpers

namespace {

std::string loc(const std::string& base, const char* field) { return base + "." + field; }

std::string id_string(const json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError(where, "identifier must be a string or integer");
}

double number(const json& obj, const char* field, const std::string& base) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(loc(base, field), "missing required field");
  if (!it->is_number()) throw ParseError(loc(base, field), "expected a number");
  return it->get<double>();
}

std::optional<double> optional_number(const json& obj, const char* field,
                                      const std::string& base) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(loc(base, field), "expected a number");
  return it->get<double>();
}

double positive(const json& obj, const char* field, const std::string& base) {
  const double v = number(obj, field, base);
  if (!(v > 0.0)) throw ParseError(loc(base, field), "must be positive");
  return v;
}

unsigned parse_role(const std::string& name, const std::string& where) {
  if (name == "junction") return 0;
  if (name == "slack") return static_cast<unsigned>(Role::slack);
  if (name == "injection") return static_cast<unsigned>(Role::injection);
  if (name == "withdrawal") return static_cast<unsigned>(Role::withdrawal);
  throw ParseError(where, "unknown role '" + name + "'");
}

json parse_json(std::string_view document, const std::string& what) {
  try {
    return json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(what, std::string("malformed JSON: ") + e.what());
  }
}

const json& array_field(const json& root, const char* field, bool required) {
  static const json empty = json::array();
  auto it = root.find(field);
  if (it == root.end()) {
    if (required) throw ParseError(field, "missing required array");
    return empty;
  }
  if (!it->is_array()) throw ParseError(field, "expected an array");
  return *it;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Network parse_network(std::string_view document) {
  const json root = parse_json(document, "network");
  if (!root.is_object()) throw ParseError("network", "top level must be an object");

  Network net;
  std::set<std::string> ids;

  const json& nodes = array_field(root, "nodes", true);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string base = "nodes[" + std::to_string(k) + "]";
    const json& jn = nodes[k];
    if (!jn.is_object()) throw ParseError(base, "expected an object");
    Node n;
    if (!jn.contains("id")) throw ParseError(loc(base, "id"), "missing required field");
    n.id = id_string(jn.at("id"), loc(base, "id"));
    if (!ids.insert(n.id).second) throw ParseError(loc(base, "id"), "duplicate id '" + n.id + "'");

    if (auto it = jn.find("role"); it != jn.end()) {
      if (it->is_string()) {
        n.roles = parse_role(it->get<std::string>(), loc(base, "role"));
      } else if (it->is_array()) {
        for (const auto& r : *it) {
          if (!r.is_string()) throw ParseError(loc(base, "role"), "roles must be strings");
          n.roles |= parse_role(r.get<std::string>(), loc(base, "role"));
        }
      } else {
        throw ParseError(loc(base, "role"), "expected a string or array of strings");
      }
    }
    n.p_min = positive(jn, "p_min", base);
    n.p_max = positive(jn, "p_max", base);
    if (!(n.p_min < n.p_max)) throw ParseError(loc(base, "p_max"), "need p_min < p_max");
    n.p_slack = optional_number(jn, "p_slack", base);
    if (n.is_slack()) {
      if (!n.p_slack) throw ParseError(loc(base, "p_slack"), "slack node needs p_slack");
      if (!(*n.p_slack > 0.0)) throw ParseError(loc(base, "p_slack"), "must be positive");
    }
    if (auto q = optional_number(jn, "q_s_max", base)) {
      if (!(*q > 0.0)) throw ParseError(loc(base, "q_s_max"), "must be positive");
      n.q_s_max = *q;
    }
    n.ge_max = optional_number(jn, "gE_max", base);
    n.ge_fixed = optional_number(jn, "gE_fixed", base);
    if (n.ge_max && *n.ge_max < 0.0) throw ParseError(loc(base, "gE_max"), "negative energy bound");
    if (n.ge_fixed && *n.ge_fixed < 0.0) {
      throw ParseError(loc(base, "gE_fixed"), "negative energy demand");
    }
    if (n.ge_max && n.ge_fixed) {
      throw ParseError(base, "gE_max and gE_fixed are mutually exclusive");
    }
    if (auto it = jn.find("auxiliary"); it != jn.end() && it->is_boolean()) {
      n.auxiliary = it->get<bool>();
    }
    net.nodes.push_back(std::move(n));
  }
  net.reindex();

  auto endpoint = [&](const json& obj, const char* field, const std::string& base) {
    if (!obj.contains(field)) throw ParseError(loc(base, field), "missing required field");
    std::string id = id_string(obj.at(field), loc(base, field));
    if (net.node_index(id) == Network::npos) {
      throw ParseError(loc(base, field), "unknown node reference '" + id + "'");
    }
    return id;
  };

  std::set<std::string> edge_ids;
  const json& pipes = array_field(root, "pipes", false);
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    const std::string base = "pipes[" + std::to_string(k) + "]";
    const json& jp = pipes[k];
    if (!jp.is_object()) throw ParseError(base, "expected an object");
    Pipe p;
    p.id = jp.contains("id") ? id_string(jp.at("id"), loc(base, "id")) : "P" + std::to_string(k + 1);
    if (!edge_ids.insert(p.id).second) throw ParseError(loc(base, "id"), "duplicate id '" + p.id + "'");
    p.from = endpoint(jp, "from", base);
    p.to = endpoint(jp, "to", base);
    p.length = positive(jp, "length", base);
    p.diameter = positive(jp, "diameter", base);
    p.lambda = positive(jp, "friction", base);
    const double default_area = std::numbers::pi * p.diameter * p.diameter / 4.0;
    p.area = optional_number(jp, "area", base).value_or(default_area);
    if (!(p.area > 0.0)) throw ParseError(loc(base, "area"), "must be positive");
    net.pipes.push_back(std::move(p));
  }

  const json& comps = array_field(root, "compressors", false);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string base = "compressors[" + std::to_string(k) + "]";
    const json& jc = comps[k];
    if (!jc.is_object()) throw ParseError(base, "expected an object");
    Compressor c;
    c.id = jc.contains("id") ? id_string(jc.at("id"), loc(base, "id")) : "C" + std::to_string(k + 1);
    if (!edge_ids.insert(c.id).second) throw ParseError(loc(base, "id"), "duplicate id '" + c.id + "'");
    c.from = endpoint(jc, "from", base);
    c.to = endpoint(jc, "to", base);
    c.alpha_max = number(jc, "alpha_max", base);
    if (!(c.alpha_max >= 1.0)) throw ParseError(loc(base, "alpha_max"), "must be >= 1");
    c.fc_max = positive(jc, "fc_max", base);
    net.compressors.push_back(std::move(c));
  }

  if (std::none_of(net.nodes.begin(), net.nodes.end(), [](const Node& n) { return n.is_slack(); })) {
    throw ParseError("nodes", "missing slack node");
  }
  return net;
}

Network load_network(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_network(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.where(), e.detail());
  }
}

std::string network_to_json(const Network& net) {
  json root;
  root["nodes"] = json::array();
  for (const Node& n : net.nodes) {
    json jn;
    jn["id"] = n.id;
    std::vector<std::string> roles;
    if (n.has(Role::slack)) roles.emplace_back("slack");
    if (n.has(Role::injection)) roles.emplace_back("injection");
    if (n.has(Role::withdrawal)) roles.emplace_back("withdrawal");
    if (roles.empty()) {
      jn["role"] = "junction";
    } else if (roles.size() == 1) {
      jn["role"] = roles.front();
    } else {
      jn["role"] = roles;
    }
    jn["p_min"] = n.p_min;
    jn["p_max"] = n.p_max;
    if (n.p_slack) jn["p_slack"] = *n.p_slack;
    if (n.is_supply()) jn["q_s_max"] = n.q_s_max;
    if (n.ge_max) jn["gE_max"] = *n.ge_max;
    if (n.ge_fixed) jn["gE_fixed"] = *n.ge_fixed;
    if (n.auxiliary) jn["auxiliary"] = true;
    root["nodes"].push_back(std::move(jn));
  }
  root["pipes"] = json::array();
  for (const Pipe& p : net.pipes) {
    root["pipes"].push_back({{"id", p.id},
                             {"from", p.from},
                             {"to", p.to},
                             {"length", p.length},
                             {"diameter", p.diameter},
                             {"friction", p.lambda},
                             {"area", p.area}});
  }
  root["compressors"] = json::array();
  for (const Compressor& c : net.compressors) {
    root["compressors"].push_back({{"id", c.id},
                                   {"from", c.from},
                                   {"to", c.to},
                                   {"alpha_max", c.alpha_max},
                                   {"fc_max", c.fc_max}});
  }
  return root.dump(2);
}

// ---------------------------------------------------------------------------
// Scenario parsing

namespace {

Profile parse_profile(const json& jp, const std::string& base) {
  if (jp.is_number()) return ConstantProfile{jp.get<double>()};
  if (!jp.is_object()) throw ParseError(base, "profile must be a number or an object");
  const std::string type = jp.value("type", std::string("constant"));
  if (type == "constant") return ConstantProfile{number(jp, "value", base)};
  if (type == "sinusoid") {
    SinusoidProfile s;
    s.eta0 = number(jp, "eta0", base);
    s.delta = number(jp, "delta", base);
    s.nu = number(jp, "nu", base);
    return s;
  }
  if (type == "series") {
    SeriesProfile s;
    auto ts = jp.find("times");
    auto vs = jp.find("values");
    if (ts == jp.end() || vs == jp.end() || !ts->is_array() || !vs->is_array()) {
      throw ParseError(base, "series profile needs arrays 'times' and 'values'");
    }
    if (ts->size() != vs->size() || ts->empty()) {
      throw ParseError(base, "series 'times' and 'values' must be non-empty and equal length");
    }
    for (std::size_t k = 0; k < ts->size(); ++k) {
      if (!(*ts)[k].is_number() || !(*vs)[k].is_number()) {
        throw ParseError(base, "series entries must be numbers");
      }
      s.times.push_back((*ts)[k].get<double>());
      s.values.push_back((*vs)[k].get<double>());
      if (k > 0 && !(s.times[k] > s.times[k - 1])) {
        throw ParseError(base + ".times", "must be strictly increasing");
      }
    }
    return s;
  }
  throw ParseError(base + ".type", "unknown profile type '" + type + "'");
}

void read_into(const json& obj, const char* field, const std::string& base, double& target) {
  if (auto v = optional_number(obj, field, base)) target = *v;
}

}  // namespace

Scenario parse_scenario(std::string_view document) {
  const json root = parse_json(document, "scenario");
  if (!root.is_object()) throw ParseError("scenario", "top level must be an object");
  Scenario s;
  const std::string base = "scenario";
  s.horizon_h = positive(root, "horizon_hours", base);
  s.dt_h = positive(root, "dt_hours", base);
  s.segment_length_m = positive(root, "segment_length_m", base);
  const double steps = s.horizon_h / s.dt_h;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ParseError("scenario.dt_hours", "dt must divide the horizon evenly");
  }

  if (auto it = root.find("profiles"); it != root.end()) {
    if (!it->is_object()) throw ParseError("scenario.profiles", "expected an object keyed by node id");
    for (const auto& [id, jp] : it->items()) {
      const std::string where = "scenario.profiles." + id;
      Profile p = parse_profile(jp, where);
      if (profile_min(p) < 0.0 || profile_max(p) > 1.0) {
        throw ParseError(where, "injection mass fraction must stay within [0, 1]");
      }
      s.injection.emplace(id, std::move(p));
    }
  }
  if (auto it = root.find("withdrawals"); it != root.end()) {
    if (!it->is_object()) throw ParseError("scenario.withdrawals", "expected an object keyed by node id");
    for (const auto& [id, jw] : it->items()) {
      const std::string where = "scenario.withdrawals." + id;
      if (!jw.is_object()) throw ParseError(where, "expected an object");
      WithdrawalSpec w;
      const std::string mode = jw.value("mode", std::string("bound"));
      if (mode == "bound") {
        w.mode = EnergyMode::bound;
      } else if (mode == "fixed") {
        w.mode = EnergyMode::fixed;
      } else {
        throw ParseError(where + ".mode", "expected 'bound' or 'fixed'");
      }
      if (jw.contains("profile")) {
        w.profile = parse_profile(jw.at("profile"), where + ".profile");
      } else {
        w.profile = ConstantProfile{number(jw, "value", where)};
      }
      if (profile_min(w.profile) < 0.0) throw ParseError(where, "negative energy");
      s.withdrawal.emplace(id, std::move(w));
    }
  }
  if (auto it = root.find("prices"); it != root.end()) {
    const std::string where = "scenario.prices";
    read_into(*it, "c_H2", where, s.prices.c_h2);
    read_into(*it, "c_NG", where, s.prices.c_ng);
    read_into(*it, "C_E", where, s.prices.c_energy);
    read_into(*it, "zeta", where, s.prices.zeta);
  }
  read_into(root, "xi", base, s.xi);
  if (!(s.xi >= 0.0 && s.xi <= 1.0)) throw ParseError("scenario.xi", "must lie in [0, 1]");
  if (auto it = root.find("compressor_cost"); it != root.end()) {
    const std::string where = "scenario.compressor_cost";
    read_into(*it, "mu", where, s.compressor_cost.mu);
    read_into(*it, "G", where, s.compressor_cost.specific_gravity);
    read_into(*it, "T", where, s.compressor_cost.temperature);
  }
  if (auto it = root.find("gas"); it != root.end()) {
    const std::string where = "scenario.gas";
    read_into(*it, "a_H2", where, s.gas.a_h2);
    read_into(*it, "a_NG", where, s.gas.a_ng);
    read_into(*it, "R_H2", where, s.gas.r_h2);
    read_into(*it, "R_NG", where, s.gas.r_ng);
  }
  if (auto it = root.find("scales"); it != root.end()) {
    const std::string where = "scenario.scales";
    read_into(*it, "l0", where, s.l0);
    read_into(*it, "p0", where, s.p0);
    read_into(*it, "mach", where, s.mach);
  }
  try {
    s.gas.validate();
    (void)s.scales();
    (void)compressor_work_constant(s.compressor_cost.mu, s.compressor_cost.specific_gravity,
                                   s.compressor_cost.temperature);
  } catch (const DomainError& e) {
    throw ParseError("scenario", e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_scenario(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.where(), e.detail());
  }
}

// ---------------------------------------------------------------------------
// Segmentation

SegmentedNetwork segment_pipes(const Network& net, double dl) {
  if (!(dl > 0.0)) throw ConfigError("segment_pipes: dL must be positive");
  SegmentedNetwork out;
  out.original = net;
  out.original.reindex();
  out.net.nodes = net.nodes;
  out.net.compressors = net.compressors;
  out.original_node_count = net.nodes.size();
  out.pipe_segments.resize(net.pipes.size());

  for (std::size_t k = 0; k < net.pipes.size(); ++k) {
    const Pipe& p = net.pipes[k];
    const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil(p.length / dl - 1e-9)));
    const double seg_len = p.length / static_cast<double>(count);
    const Node& a = out.original.node(p.from);
    const Node& b = out.original.node(p.to);

    std::string prev = p.from;
    for (std::size_t s = 1; s <= count; ++s) {
      std::string next = p.to;
      if (s < count) {
        Node aux;
        aux.id = p.id + "#" + std::to_string(s);
        aux.p_min = std::max(a.p_min, b.p_min);
        aux.p_max = std::min(a.p_max, b.p_max);
        if (!(aux.p_min < aux.p_max)) {
          aux.p_min = std::min(a.p_min, b.p_min);
          aux.p_max = std::max(a.p_max, b.p_max);
        }
        aux.auxiliary = true;
        next = aux.id;
        out.net.nodes.push_back(std::move(aux));
      }
      Pipe seg = p;
      seg.id = count == 1 ? p.id : p.id + "/" + std::to_string(s);
      seg.from = prev;
      seg.to = next;
      seg.length = seg_len;
      out.pipe_segments[k].push_back(out.net.pipes.size());
      out.segments.push_back(Segment{k, s, count});
      out.net.pipes.push_back(std::move(seg));
      prev = next;
    }
  }
  out.net.reindex();
  return out;
}

// ---------------------------------------------------------------------------
// Topology validation

std::vector<Diagnostic> validate_topology(const Network& net) {
  std::vector<Diagnostic> out;
  const std::size_t n = net.nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);

  auto add_edge = [&](const std::string& id, const std::string& from, const std::string& to,
                      bool compressor) {
    const std::size_t a = net.node_index(from);
    const std::size_t b = net.node_index(to);
    if (a == Network::npos || b == Network::npos) {
      out.push_back({"dangling-edge", "edge " + id + " references an unknown node"});
      return;
    }
    if (a == b) {
      out.push_back({compressor ? "compressor-endpoints" : "self-loop",
                     std::string(compressor ? "compressor " : "pipe ") + id +
                         " connects node " + from + " to itself"});
      return;
    }
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (const Pipe& p : net.pipes) add_edge(p.id, p.from, p.to, false);
  for (const Compressor& c : net.compressors) add_edge(c.id, c.from, c.to, true);

  for (const Node& node : net.nodes) {
    if (node.is_supply() && node.is_withdrawal()) {
      out.push_back({"role-exclusivity",
                     "node " + node.id +
                         " is both a supply and a withdrawal node; only one of q^s and q^w "
                         "may be positive"});
    }
  }

  // Breadth-first search from every slack node; anything left is unreachable.
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> todo;
  for (std::size_t k = 0; k < n; ++k) {
    if (net.nodes[k].is_slack()) {
      seen[k] = 1;
      todo.push(k);
    }
  }
  if (todo.empty()) out.push_back({"no-slack", "network has no slack node"});
  while (!todo.empty()) {
    const std::size_t k = todo.front();
    todo.pop();
    for (std::size_t j : adj[k]) {
      if (!seen[j]) {
        seen[j] = 1;
        todo.push(j);
      }
    }
  }
  if (out.empty() || std::none_of(out.begin(), out.end(),
                                  [](const Diagnostic& d) { return d.code == "no-slack"; })) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!seen[k]) {
        out.push_back({"unreachable-node", "unreachable node " + net.nodes[k].id +
                                               " (no path to a slack node)"});
      }
    }
  }
  return out;
}

}  // namespace h2blend
