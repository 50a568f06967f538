#include "h2blend/transcription.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "h2blend/errors.hpp"

namespace h2blend {

TimeGrid build_time_grid(double horizon_h, double dt_h) {
  if (!(horizon_h > 0.0) || !(dt_h > 0.0)) {
    throw ConfigError("time grid: horizon and dt must be positive");
  }
  const double ratio = horizon_h / dt_h;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("time grid: dt = " + std::to_string(dt_h) +
                      " h does not divide the horizon " + std::to_string(horizon_h) + " h");
  }
  TimeGrid g;
  g.steps = static_cast<int>(steps);
  g.dt_h = dt_h;
  g.horizon_h = horizon_h;
  return g;
}

double cyclic_forward_difference(double x_succ, double x_n, double dt) {
  if (!(dt > 0.0)) throw ConfigError("cyclic_forward_difference: dt must be positive");
  return (x_succ - x_n) / dt;
}

std::vector<double> cyclic_derivative(std::span<const double> x, double dt) {
  std::vector<double> d(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t s = n + 1 == x.size() ? 0 : n + 1;
    d[n] = cyclic_forward_difference(x[s], x[n], dt);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Residual kernels

HatGas HatGas::from(const GasConstants& gas, const NondimScales& scales) {
  const double a02 = scales.a0 * scales.a0;
  return {gas.a_h2 * gas.a_h2 / a02, gas.a_ng * gas.a_ng / a02, gas.r_h2 / gas.r_ng};
}

double pressure_hat(const NodeValues& v, const HatGas& gas) {
  const double a2 = gas.a2_ng + (gas.a2_h2 - gas.a2_ng) * v.eta;
  return a2 * (v.rho_h2 + v.rho_ng);
}

std::array<double, 3> pipe_segment_residuals(const SegmentInput& in, const HatGas& gas) {
  const double rho_bar =
      0.5 * (in.from.rho_h2 + in.from.rho_ng + in.to.rho_h2 + in.to.rho_ng);
  if (!(rho_bar > 0.0)) {
    throw EvaluationError("pipe segment: mean density is not positive");
  }
  double store_h2 = 0.0;
  double store_ng = 0.0;
  if (in.dt_s > 0.0) {
    const double c = in.length * in.area / (2.0 * in.kappa * in.dt_s);
    store_h2 = c * ((in.from_next.rho_h2 + in.to_next.rho_h2) - (in.from.rho_h2 + in.to.rho_h2));
    store_ng = c * ((in.from_next.rho_ng + in.to_next.rho_ng) - (in.from.rho_ng + in.to.rho_ng));
  }
  const double eta0 = in.from.eta;
  const double r_h2 = store_h2 + in.gamma_l * in.fl - eta0 * in.f0;
  const double r_ng = store_ng + (1.0 - in.gamma_l) * in.fl - (1.0 - eta0) * in.f0;
  const double phi = (in.f0 + in.fl) / (2.0 * in.area);
  const double s = phi * std::sqrt(phi * phi + in.eps * in.eps);
  const double r_mom = pressure_hat(in.to, gas) - pressure_hat(in.from, gas) + in.beta * s / rho_bar;
  return {r_h2, r_ng, r_mom};
}

double compressor_residual(double p_in, double p_out, double alpha) {
  return p_out * p_out - alpha * alpha * p_in * p_in;
}

std::array<double, 2> nodal_balance_residuals(const BalanceInput& in) {
  double h2 = 0.0;
  double ng = 0.0;
  for (const EdgeFlow& e : in.inflows) {
    h2 += e.eta * e.flow;
    ng += (1.0 - e.eta) * e.flow;
  }
  for (double f : in.outflows) {
    h2 -= in.eta * f;
    ng -= (1.0 - in.eta) * f;
  }
  h2 += in.eta_s * in.q_s - in.eta * in.q_w;
  ng += (1.0 - in.eta_s) * in.q_s - (1.0 - in.eta) * in.q_w;
  return {h2, ng};
}

double eta_definition_residual(const NodeValues& v) {
  return v.eta * (v.rho_h2 + v.rho_ng) - v.rho_h2;
}

double slack_pressure_residual(const NodeValues& v, double p_slack, const HatGas& gas) {
  return pressure_hat(v, gas) - p_slack;
}

double energy_residual(double eta, double q_w, double g, const GasConstants& gas) {
  return g - (eta * gas.r_h2 + (1.0 - eta) * gas.r_ng) * q_w;
}

const char* row_kind_name(RowKind kind) {
  switch (kind) {
    case RowKind::continuity_h2: return "continuity_h2";
    case RowKind::continuity_ng: return "continuity_ng";
    case RowKind::momentum: return "momentum";
    case RowKind::compressor_boost: return "compressor_boost";
    case RowKind::balance_h2: return "balance_h2";
    case RowKind::balance_ng: return "balance_ng";
    case RowKind::eta_definition: return "eta_definition";
    case RowKind::slack_pressure: return "slack_pressure";
    case RowKind::energy: return "energy";
    case RowKind::energy_fixed: return "energy_fixed";
    case RowKind::pressure_bound: return "pressure_bound";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

std::string tagged(const std::string& what, const std::string& id, int t) {
  return what + "[" + id + ",t=" + std::to_string(t) + "]";
}

int node_of(const Network& net, const std::string& id, const std::string& where) {
  const std::size_t k = net.node_index(id);
  if (k == Network::npos) throw AssemblyError(where + ": unknown node " + id);
  return static_cast<int>(k);
}

double supply_price(const Prices& prices, double eta_s) {
  return eta_s * prices.c_h2 + (1.0 - eta_s) * prices.c_ng;
}

class Assembler {
 public:
  Assembler(NlpProblem& p, const AssemblyOptions& opt) : p_(p), opt_(opt) {}

  void run() {
    check_inputs();
    resolve_topology();
    build_index();
    add_variables();
    for (int t = 0; t < p_.grid.steps; ++t) add_equalities(t);
    p_.equalities = p_.nlp.num_rows();
    for (int t = 0; t < p_.grid.steps; ++t) add_pressure_bounds(t);
    p_.inequalities = p_.nlp.num_rows() - p_.equalities;
    add_objective();
    p_.nlp.finalize();
  }

 private:
  const Network& net() const { return p_.segnet.net; }

  void check_inputs() const {
    for (const Node& n : net().nodes) {
      if (!(n.p_min > 0.0 && n.p_min < n.p_max)) {
        throw AssemblyError("node " + n.id + ": need 0 < p_min < p_max");
      }
      if (n.is_slack()) {
        if (!n.p_slack) throw AssemblyError("slack node " + n.id + " has no p_slack");
        if (*n.p_slack < n.p_min || *n.p_slack > n.p_max) {
          throw AssemblyError("slack node " + n.id + ": p_slack outside [p_min, p_max]");
        }
      }
      if (n.is_supply() && n.q_s_max < 0.0) {
        throw AssemblyError("node " + n.id + ": negative q_s_max");
      }
    }
    for (const Compressor& c : net().compressors) {
      if (c.alpha_max < 1.0) throw AssemblyError("compressor " + c.id + ": alpha_max < 1");
      if (c.fc_max < 0.0) throw AssemblyError("compressor " + c.id + ": negative fc_max");
    }
    if (!(p_.scenario.xi >= 0.0 && p_.scenario.xi <= 1.0)) {
      throw AssemblyError("objective weight xi outside [0, 1]");
    }
  }

  void resolve_topology() {
    const NondimScales& s = p_.scales;
    for (const Pipe& pipe : net().pipes) {
      p_.seg_from.push_back(node_of(net(), pipe.from, "pipe " + pipe.id));
      p_.seg_to.push_back(node_of(net(), pipe.to, "pipe " + pipe.id));
      p_.seg_beta.push_back(pipe_beta(pipe.lambda, pipe.length, pipe.diameter, s.mach));
      p_.seg_length.push_back(pipe.length / s.l0);
      p_.seg_area.push_back(pipe.area / s.area0);
    }
    for (const Compressor& c : net().compressors) {
      p_.comp_from.push_back(node_of(net(), c.from, "compressor " + c.id));
      p_.comp_to.push_back(node_of(net(), c.to, "compressor " + c.id));
    }
  }

  void build_index() {
    VariableIndex& ix = p_.index;
    ix.steps = p_.grid.steps;
    ix.nodes = static_cast<int>(net().nodes.size());
    ix.segments = static_cast<int>(net().pipes.size());
    ix.compressors = static_cast<int>(net().compressors.size());
    ix.supply_slot.assign(static_cast<std::size_t>(ix.nodes), -1);
    ix.withdrawal_slot.assign(static_cast<std::size_t>(ix.nodes), -1);
    for (int i = 0; i < ix.nodes; ++i) {
      const Node& n = net().nodes[static_cast<std::size_t>(i)];
      if (n.is_supply()) {
        ix.supply_slot[static_cast<std::size_t>(i)] = ix.supplies++;
        ix.supply_nodes.push_back(i);
      }
      if (n.is_withdrawal()) {
        ix.withdrawal_slot[static_cast<std::size_t>(i)] = ix.withdrawals++;
        ix.withdrawal_nodes.push_back(i);
      }
    }
  }

  const std::string& node_id(int i) const { return net().nodes[static_cast<std::size_t>(i)].id; }
  const Node& node(int i) const { return net().nodes[static_cast<std::size_t>(i)]; }

  void add_variables() {
    const VariableIndex& ix = p_.index;
    ExprNlp& nlp = p_.nlp;
    const double fs = p_.flow_scale;
    const double es = p_.energy_scale;
    for (int t = 0; t < ix.steps; ++t) {
      const double time = p_.grid.time(t);
      auto expect = [](int got, int want) {
        if (got != want) throw std::logic_error("variable layout mismatch");
      };
      for (int i = 0; i < ix.nodes; ++i) {
        expect(nlp.add_variable(tagged("rho_h2", node_id(i), t), 0.0, kInf), ix.rho_h2(i, t));
      }
      for (int i = 0; i < ix.nodes; ++i) {
        expect(nlp.add_variable(tagged("rho_ng", node_id(i), t), 0.0, kInf), ix.rho_ng(i, t));
      }
      for (int i = 0; i < ix.nodes; ++i) {
        expect(nlp.add_variable(tagged("eta", node_id(i), t), 0.0, 1.0), ix.eta(i, t));
      }
      for (int s = 0; s < ix.segments; ++s) {
        expect(nlp.add_variable(tagged("f0", net().pipes[static_cast<std::size_t>(s)].id, t),
                                -kInf, kInf),
               ix.f0(s, t));
      }
      for (int s = 0; s < ix.segments; ++s) {
        expect(nlp.add_variable(tagged("fL", net().pipes[static_cast<std::size_t>(s)].id, t),
                                -kInf, kInf),
               ix.fl(s, t));
      }
      for (int s = 0; s < ix.segments; ++s) {
        expect(nlp.add_variable(
                   tagged("gamma_L", net().pipes[static_cast<std::size_t>(s)].id, t), 0.0, 1.0),
               ix.gamma_l(s, t));
      }
      for (int c = 0; c < ix.compressors; ++c) {
        const Compressor& comp = net().compressors[static_cast<std::size_t>(c)];
        expect(nlp.add_variable(tagged("alpha", comp.id, t), 1.0, comp.alpha_max),
               ix.alpha(c, t));
      }
      for (int c = 0; c < ix.compressors; ++c) {
        const Compressor& comp = net().compressors[static_cast<std::size_t>(c)];
        expect(nlp.add_variable(tagged("fc", comp.id, t), 0.0, comp.fc_max / fs), ix.fc(c, t));
      }
      for (int i : ix.supply_nodes) {
        expect(nlp.add_variable(tagged("q_s", node_id(i), t), 0.0, node(i).q_s_max / fs),
               ix.qs(i, t));
      }
      for (int i : ix.withdrawal_nodes) {
        expect(nlp.add_variable(tagged("q_w", node_id(i), t), 0.0, kInf), ix.qw(i, t));
      }
      for (int i : ix.withdrawal_nodes) {
        const WithdrawalSpec spec = p_.scenario.withdrawal_spec(node(i));
        double upper = kInf;
        if (spec.mode == EnergyMode::bound) {
          upper = evaluate_profile(spec.profile, time, p_.grid.horizon_h);
          if (upper < 0.0) throw AssemblyError("node " + node_id(i) + ": negative gE_max");
          upper /= es;
        }
        expect(nlp.add_variable(tagged("g_E", node_id(i), t), 0.0, upper), ix.ge(i, t));
      }
    }
  }

  // +/- a^2(eta) (rho_h2 + rho_ng) of node i at time t.
  void add_pressure(Row& row, int i, int t, double sign) const {
    const VariableIndex& ix = p_.index;
    const double slope = p_.gas.a2_h2 - p_.gas.a2_ng;
    row.linear.push_back({ix.rho_h2(i, t), sign * p_.gas.a2_ng});
    row.linear.push_back({ix.rho_ng(i, t), sign * p_.gas.a2_ng});
    row.bilinear.push_back({ix.eta(i, t), ix.rho_h2(i, t), sign * slope});
    row.bilinear.push_back({ix.eta(i, t), ix.rho_ng(i, t), sign * slope});
  }

  void push(Row row, RowKind kind, int t, const std::string& id) {
    row.tag = static_cast<int>(kind);
    row.time = t;
    row.name = tagged(row_kind_name(kind), id, t);
    p_.nlp.add_row(std::move(row));
  }

  void add_equalities(int t) {
    const VariableIndex& ix = p_.index;
    const int tn = p_.grid.succ(t);
    const bool storage = tn != t;
    const double time = p_.grid.time(t);

    for (int s = 0; s < ix.segments; ++s) {
      const std::string& id = net().pipes[static_cast<std::size_t>(s)].id;
      const auto ss = static_cast<std::size_t>(s);
      const int i = p_.seg_from[ss];
      const int j = p_.seg_to[ss];
      const double c =
          p_.seg_length[ss] * p_.seg_area[ss] / (2.0 * p_.scales.kappa * p_.grid.dt_seconds());

      Row h2;
      Row ng;
      if (storage) {
        for (int k : {i, j}) {
          h2.linear.push_back({ix.rho_h2(k, tn), c});
          h2.linear.push_back({ix.rho_h2(k, t), -c});
          ng.linear.push_back({ix.rho_ng(k, tn), c});
          ng.linear.push_back({ix.rho_ng(k, t), -c});
        }
      }
      h2.bilinear.push_back({ix.gamma_l(s, t), ix.fl(s, t), 1.0});
      h2.bilinear.push_back({ix.eta(i, t), ix.f0(s, t), -1.0});
      ng.linear.push_back({ix.fl(s, t), 1.0});
      ng.bilinear.push_back({ix.gamma_l(s, t), ix.fl(s, t), -1.0});
      ng.linear.push_back({ix.f0(s, t), -1.0});
      ng.bilinear.push_back({ix.eta(i, t), ix.f0(s, t), 1.0});
      push(std::move(h2), RowKind::continuity_h2, t, id);
      push(std::move(ng), RowKind::continuity_ng, t, id);

      Row mom;
      add_pressure(mom, j, t, 1.0);
      add_pressure(mom, i, t, -1.0);
      mom.friction.push_back({ix.f0(s, t),
                              ix.fl(s, t),
                              {ix.rho_h2(i, t), ix.rho_ng(i, t), ix.rho_h2(j, t), ix.rho_ng(j, t)},
                              p_.seg_beta[ss],
                              1.0 / (2.0 * p_.seg_area[ss]),
                              opt_.friction_eps});
      push(std::move(mom), RowKind::momentum, t, id);
    }

    for (int c = 0; c < ix.compressors; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const int i = p_.comp_from[cs];
      const int j = p_.comp_to[cs];
      Row row;
      row.boost.push_back({{ix.eta(i, t), ix.rho_h2(i, t), ix.rho_ng(i, t)},
                           {ix.eta(j, t), ix.rho_h2(j, t), ix.rho_ng(j, t)},
                           ix.alpha(c, t),
                           p_.gas.a2_ng,
                           p_.gas.a2_h2 - p_.gas.a2_ng});
      push(std::move(row), RowKind::compressor_boost, t, net().compressors[cs].id);
    }

    for (int j = 0; j < ix.nodes; ++j) {
      const Node& nd = node(j);
      Row h2;
      Row ng;
      for (int s = 0; s < ix.segments; ++s) {
        const auto ss = static_cast<std::size_t>(s);
        if (p_.seg_to[ss] == j) {
          h2.bilinear.push_back({ix.gamma_l(s, t), ix.fl(s, t), 1.0});
          ng.linear.push_back({ix.fl(s, t), 1.0});
          ng.bilinear.push_back({ix.gamma_l(s, t), ix.fl(s, t), -1.0});
        }
        if (p_.seg_from[ss] == j) {
          h2.bilinear.push_back({ix.eta(j, t), ix.f0(s, t), -1.0});
          ng.linear.push_back({ix.f0(s, t), -1.0});
          ng.bilinear.push_back({ix.eta(j, t), ix.f0(s, t), 1.0});
        }
      }
      for (int c = 0; c < ix.compressors; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        if (p_.comp_to[cs] == j) {
          const int k = p_.comp_from[cs];
          h2.bilinear.push_back({ix.eta(k, t), ix.fc(c, t), 1.0});
          ng.linear.push_back({ix.fc(c, t), 1.0});
          ng.bilinear.push_back({ix.eta(k, t), ix.fc(c, t), -1.0});
        }
        if (p_.comp_from[cs] == j) {
          h2.bilinear.push_back({ix.eta(j, t), ix.fc(c, t), -1.0});
          ng.linear.push_back({ix.fc(c, t), -1.0});
          ng.bilinear.push_back({ix.eta(j, t), ix.fc(c, t), 1.0});
        }
      }
      if (nd.is_supply()) {
        const double eta_s = p_.scenario.supply_fraction(nd.id, time);
        h2.linear.push_back({ix.qs(j, t), eta_s});
        ng.linear.push_back({ix.qs(j, t), 1.0 - eta_s});
      }
      if (nd.is_withdrawal()) {
        h2.bilinear.push_back({ix.eta(j, t), ix.qw(j, t), -1.0});
        ng.linear.push_back({ix.qw(j, t), -1.0});
        ng.bilinear.push_back({ix.eta(j, t), ix.qw(j, t), 1.0});
      }
      push(std::move(h2), RowKind::balance_h2, t, nd.id);
      push(std::move(ng), RowKind::balance_ng, t, nd.id);

      Row def;
      def.bilinear.push_back({ix.eta(j, t), ix.rho_h2(j, t), 1.0});
      def.bilinear.push_back({ix.eta(j, t), ix.rho_ng(j, t), 1.0});
      def.linear.push_back({ix.rho_h2(j, t), -1.0});
      push(std::move(def), RowKind::eta_definition, t, nd.id);

      if (nd.is_slack()) {
        Row row;
        add_pressure(row, j, t, 1.0);
        row.constant = -*nd.p_slack / p_.scales.p0;
        push(std::move(row), RowKind::slack_pressure, t, nd.id);
      }
      if (nd.is_withdrawal()) {
        Row row;
        row.linear.push_back({ix.ge(j, t), 1.0});
        row.linear.push_back({ix.qw(j, t), -1.0});
        row.bilinear.push_back({ix.eta(j, t), ix.qw(j, t), -(p_.gas.r_h2 - 1.0)});
        push(std::move(row), RowKind::energy, t, nd.id);

        const WithdrawalSpec spec = p_.scenario.withdrawal_spec(nd);
        if (spec.mode == EnergyMode::fixed) {
          const double g = evaluate_profile(spec.profile, time, p_.grid.horizon_h);
          if (g < 0.0) throw AssemblyError("node " + nd.id + ": negative fixed energy demand");
          Row fixed;
          fixed.linear.push_back({ix.ge(j, t), 1.0});
          fixed.constant = -g / p_.energy_scale;
          push(std::move(fixed), RowKind::energy_fixed, t, nd.id);
        }
      }
    }
  }

  void add_pressure_bounds(int t) {
    for (int j = 0; j < p_.index.nodes; ++j) {
      Row row;
      add_pressure(row, j, t, 1.0);
      row.lower = node(j).p_min / p_.scales.p0;
      row.upper = node(j).p_max / p_.scales.p0;
      push(std::move(row), RowKind::pressure_bound, t, node_id(j));
    }
  }

  void add_objective() {
    const VariableIndex& ix = p_.index;
    const Scenario& sc = p_.scenario;
    const double xi = sc.xi;
    const double dt_s = p_.grid.dt_seconds();
    const double dt_h = p_.grid.dt_h;
    const double k = compressor_work_constant(sc.compressor_cost.mu,
                                              sc.compressor_cost.specific_gravity,
                                              sc.compressor_cost.temperature);
    ObjectiveExpr obj;
    for (int t = 0; t < ix.steps; ++t) {
      const double time = p_.grid.time(t);
      for (int i : ix.supply_nodes) {
        const double price = supply_price(sc.prices, sc.supply_fraction(node_id(i), time));
        obj.linear.push_back({ix.qs(i, t), xi * price * p_.flow_scale * dt_s});
      }
      for (int i : ix.withdrawal_nodes) {
        obj.linear.push_back({ix.ge(i, t), -xi * sc.prices.c_energy * p_.energy_scale * dt_s});
      }
      for (int c = 0; c < ix.compressors; ++c) {
        // K f (sqrt(alpha) - 1) is in W; zeta is per kWh.
        obj.root_cost.push_back({ix.fc(c, t), ix.alpha(c, t),
                                 (1.0 - xi) * k * p_.flow_scale / 1000.0 * sc.prices.zeta * dt_h});
      }
    }
    double scale = 0.0;
    for (const auto& term : obj.linear) scale = std::max(scale, std::abs(term.coef));
    for (const auto& term : obj.root_cost) scale = std::max(scale, std::abs(term.coef));
    if (!(scale > 0.0)) scale = 1.0;
    for (auto& term : obj.linear) term.coef /= scale;
    for (auto& term : obj.root_cost) term.coef /= scale;
    p_.objective_scale = scale;
    p_.nlp.objective_expr() = std::move(obj);
  }

  NlpProblem& p_;
  const AssemblyOptions& opt_;
};

}  // namespace

NlpProblem assemble_nlp(const SegmentedNetwork& segnet, const Scenario& scenario,
                        const TimeGrid& grid, const AssemblyOptions& options) {
  NlpProblem p;
  p.segnet = segnet;
  p.segnet.net.reindex();
  p.scenario = scenario;
  p.grid = grid;
  p.scales = scenario.scales();
  p.gas = HatGas::from(scenario.gas, p.scales);
  p.flow_scale = p.scales.flow();
  p.energy_scale = p.flow_scale * scenario.gas.r_ng;
  Assembler(p, options).run();
  return p;
}

ObjectiveBreakdown evaluate_objective(const NlpProblem& p, std::span<const double> x) {
  const VariableIndex& ix = p.index;
  const Scenario& sc = p.scenario;
  const Network& net = p.segnet.net;
  const double k = compressor_work_constant(sc.compressor_cost.mu,
                                            sc.compressor_cost.specific_gravity,
                                            sc.compressor_cost.temperature);
  ObjectiveBreakdown out;
  for (int t = 0; t < ix.steps; ++t) {
    const double time = p.grid.time(t);
    double rate = 0.0;
    for (int i : ix.supply_nodes) {
      const double eta_s =
          sc.supply_fraction(net.nodes[static_cast<std::size_t>(i)].id, time);
      rate += supply_price(sc.prices, eta_s) * x[static_cast<std::size_t>(ix.qs(i, t))] *
              p.flow_scale;
    }
    for (int i : ix.withdrawal_nodes) {
      rate -= sc.prices.c_energy * x[static_cast<std::size_t>(ix.ge(i, t))] * p.energy_scale;
    }
    out.economic += rate * p.grid.dt_seconds();
    double power_kw = 0.0;
    for (int c = 0; c < ix.compressors; ++c) {
      const double f = x[static_cast<std::size_t>(ix.fc(c, t))] * p.flow_scale;
      const double a = x[static_cast<std::size_t>(ix.alpha(c, t))];
      power_kw += k * f * (std::sqrt(a) - 1.0) / 1000.0;
    }
    out.compression += power_kw * sc.prices.zeta * p.grid.dt_h;
  }
  out.total = sc.xi * out.economic + (1.0 - sc.xi) * out.compression;
  return out;
}

// ---------------------------------------------------------------------------
// Initial point

std::vector<double> initial_point(const NlpProblem& p) {
  const VariableIndex& ix = p.index;
  const Network& net = p.segnet.net;
  const Scenario& sc = p.scenario;
  const auto lower = p.nlp.var_lower();
  const auto upper = p.nlp.var_upper();

  int slack = -1;
  for (int i = 0; i < ix.nodes; ++i) {
    if (net.nodes[static_cast<std::size_t>(i)].is_slack()) {
      slack = i;
      break;
    }
  }
  double p_ref = 0.0;
  double eta0 = 0.0;
  if (slack >= 0) {
    const Node& s = net.nodes[static_cast<std::size_t>(slack)];
    p_ref = *s.p_slack;
    eta0 = std::clamp(sc.supply_fraction(s.id, 0.0), 0.0, 1.0);
  } else {
    p_ref = 0.5 * (net.nodes.front().p_min + net.nodes.front().p_max);
  }
  const double energy_per_kg = eta0 * sc.gas.r_h2 + (1.0 - eta0) * sc.gas.r_ng;

  // Withdrawals and supplies at t = 0.
  std::vector<double> qw(static_cast<std::size_t>(ix.nodes), 0.0);
  for (int i : ix.withdrawal_nodes) {
    const Node& nd = net.nodes[static_cast<std::size_t>(i)];
    const WithdrawalSpec spec = sc.withdrawal_spec(nd);
    const double g = std::max(0.0, evaluate_profile(spec.profile, 0.0, p.grid.horizon_h));
    const double share = spec.mode == EnergyMode::bound ? 0.5 : 1.0;
    qw[static_cast<std::size_t>(i)] = share * g / energy_per_kg / p.flow_scale;
  }
  std::vector<double> demand(static_cast<std::size_t>(ix.nodes), 0.0);  // in - out
  double total = 0.0;
  for (int i = 0; i < ix.nodes; ++i) {
    demand[static_cast<std::size_t>(i)] = qw[static_cast<std::size_t>(i)];
    total += qw[static_cast<std::size_t>(i)];
  }
  // Injection nodes start at half their limit, never more than the total
  // demand; at zero injection their pipes' species rows are rank deficient.
  // Slack nodes cover the rest.
  std::vector<double> qs(static_cast<std::size_t>(ix.nodes), 0.0);
  double injected = 0.0;
  if (!ix.supply_nodes.empty()) {
    for (int i : ix.supply_nodes) {
      const Node& nd = net.nodes[static_cast<std::size_t>(i)];
      if (nd.is_slack()) continue;
      const double q = std::min(0.5 * nd.q_s_max / p.flow_scale, std::max(0.0, total - injected));
      qs[static_cast<std::size_t>(i)] = q;
      demand[static_cast<std::size_t>(i)] -= q;
      injected += q;
    }
  }

  // Least-norm edge flows with the Laplacian grounded at every slack node.
  const int edges = ix.segments + ix.compressors;
  std::vector<int> efrom(static_cast<std::size_t>(edges));
  std::vector<int> eto(static_cast<std::size_t>(edges));
  for (int s = 0; s < ix.segments; ++s) {
    efrom[static_cast<std::size_t>(s)] = p.seg_from[static_cast<std::size_t>(s)];
    eto[static_cast<std::size_t>(s)] = p.seg_to[static_cast<std::size_t>(s)];
  }
  for (int c = 0; c < ix.compressors; ++c) {
    efrom[static_cast<std::size_t>(ix.segments + c)] = p.comp_from[static_cast<std::size_t>(c)];
    eto[static_cast<std::size_t>(ix.segments + c)] = p.comp_to[static_cast<std::size_t>(c)];
  }
  std::vector<int> reduced(static_cast<std::size_t>(ix.nodes), -1);
  int nred = 0;
  for (int i = 0; i < ix.nodes; ++i) {
    if (!net.nodes[static_cast<std::size_t>(i)].is_slack()) {
      reduced[static_cast<std::size_t>(i)] = nred++;
    }
  }
  std::vector<double> potential(static_cast<std::size_t>(ix.nodes), 0.0);
  if (nred > 0 && slack >= 0) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int e = 0; e < edges; ++e) {
      const int a = reduced[static_cast<std::size_t>(efrom[static_cast<std::size_t>(e)])];
      const int b = reduced[static_cast<std::size_t>(eto[static_cast<std::size_t>(e)])];
      if (a >= 0) trip.emplace_back(a, a, 1.0);
      if (b >= 0) trip.emplace_back(b, b, 1.0);
      if (a >= 0 && b >= 0) {
        trip.emplace_back(a, b, -1.0);
        trip.emplace_back(b, a, -1.0);
      }
    }
    // A tiny diagonal shift keeps isolated components solvable.
    for (int r = 0; r < nred; ++r) trip.emplace_back(r, r, 1e-12);
    Eigen::SparseMatrix<double> lap(nred, nred);
    lap.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs(nred);
    for (int i = 0; i < ix.nodes; ++i) {
      const int r = reduced[static_cast<std::size_t>(i)];
      // Potential y with f = y_from - y_to; node balance in - out = demand.
      if (r >= 0) rhs[r] = -demand[static_cast<std::size_t>(i)];
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(lap);
    if (ldlt.info() == Eigen::Success) {
      const Eigen::VectorXd y = ldlt.solve(rhs);
      for (int i = 0; i < ix.nodes; ++i) {
        const int r = reduced[static_cast<std::size_t>(i)];
        if (r >= 0) potential[static_cast<std::size_t>(i)] = y[r];
      }
    }
  }
  std::vector<double> flow(static_cast<std::size_t>(edges));
  for (int e = 0; e < edges; ++e) {
    flow[static_cast<std::size_t>(e)] =
        potential[static_cast<std::size_t>(efrom[static_cast<std::size_t>(e)])] -
        potential[static_cast<std::size_t>(eto[static_cast<std::size_t>(e)])];
  }

  std::vector<double> x(static_cast<std::size_t>(ix.total()), 0.0);
  auto set = [&](int v, double value) {
    const auto vs = static_cast<std::size_t>(v);
    x[vs] = std::clamp(value, lower[vs], upper[vs]);
  };
  for (int t = 0; t < ix.steps; ++t) {
    for (int i = 0; i < ix.nodes; ++i) {
      const Node& nd = net.nodes[static_cast<std::size_t>(i)];
      const double pi = std::clamp(p_ref, nd.p_min, nd.p_max);
      const MixtureState st = state_from_pressure(pi, eta0, sc.gas);
      set(ix.rho_h2(i, t), st.rho_h2 / p.scales.rho0);
      set(ix.rho_ng(i, t), st.rho_ng / p.scales.rho0);
      set(ix.eta(i, t), eta0);
    }
    for (int s = 0; s < ix.segments; ++s) {
      set(ix.f0(s, t), flow[static_cast<std::size_t>(s)]);
      set(ix.fl(s, t), flow[static_cast<std::size_t>(s)]);
      set(ix.gamma_l(s, t), eta0);
    }
    for (int c = 0; c < ix.compressors; ++c) {
      set(ix.alpha(c, t), 1.0);
      set(ix.fc(c, t), flow[static_cast<std::size_t>(ix.segments + c)]);
    }
    int slack_count = 0;
    for (int i : ix.supply_nodes) {
      if (net.nodes[static_cast<std::size_t>(i)].is_slack()) ++slack_count;
    }
    for (int i : ix.supply_nodes) {
      const bool is_slack = net.nodes[static_cast<std::size_t>(i)].is_slack();
      const double rest = slack_count > 0 ? (total - injected) / slack_count : 0.0;
      set(ix.qs(i, t), is_slack ? rest : qs[static_cast<std::size_t>(i)]);
    }
    for (int i : ix.withdrawal_nodes) {
      set(ix.qw(i, t), qw[static_cast<std::size_t>(i)]);
      set(ix.ge(i, t), (1.0 + (p.gas.r_h2 - 1.0) * eta0) * qw[static_cast<std::size_t>(i)]);
    }
  }
  return x;
}

std::vector<double> replicate_steady(const NlpProblem& target, std::span<const double> steady_x) {
  const int block = target.index.block();
  if (static_cast<int>(steady_x.size()) != block) {
    throw AssemblyError("replicate_steady: steady solution has " +
                        std::to_string(steady_x.size()) + " values, expected " +
                        std::to_string(block));
  }
  std::vector<double> x(static_cast<std::size_t>(target.index.total()));
  for (int t = 0; t < target.index.steps; ++t) {
    std::copy(steady_x.begin(), steady_x.end(),
              x.begin() + static_cast<std::ptrdiff_t>(t) * block);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Debug export

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::string bound_text(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void export_nlp_csv(const NlpProblem& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ExprNlp& nlp = p.nlp;
  {
    auto out = open_csv(dir / "nlp_variables.csv");
    out << "index,name,lower,upper\n";
    for (int v = 0; v < nlp.num_variables(); ++v) {
      const auto vs = static_cast<std::size_t>(v);
      out << v << ',' << nlp.var_name(v) << ',' << bound_text(nlp.var_lower()[vs]) << ','
          << bound_text(nlp.var_upper()[vs]) << '\n';
    }
  }
  {
    auto out = open_csv(dir / "nlp_constraints.csv");
    out << "index,name,kind,time_index,lower,upper\n";
    for (int r = 0; r < nlp.num_rows(); ++r) {
      const Row& row = nlp.row(r);
      out << r << ',' << row.name << ',' << row_kind_name(static_cast<RowKind>(row.tag)) << ','
          << row.time << ',' << bound_text(row.lower) << ',' << bound_text(row.upper) << '\n';
    }
  }
  {
    auto out = open_csv(dir / "nlp_jacobian.csv");
    out << "row,col\n";
    const SparsePattern& pat = nlp.jacobian_pattern();
    for (int r = 0; r < pat.rows; ++r) {
      for (int k = pat.row_ptr[static_cast<std::size_t>(r)];
           k < pat.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
        out << r << ',' << pat.col[static_cast<std::size_t>(k)] << '\n';
      }
    }
  }
}

}  // namespace h2blend
