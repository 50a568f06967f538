#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>

#include "h2blend/errors.hpp"
#include "h2blend/trajectory.hpp"
#include "h2blend/transcription.hpp"
#include "h2blend/validation.hpp"
#include "support.hpp"

using namespace h2blend;
using doctest::Approx;

namespace {

std::unordered_map<std::string, int> row_lookup(const NlpProblem& p) {
  std::unordered_map<std::string, int> m;
  for (int r = 0; r < p.nlp.num_rows(); ++r) m.emplace(p.nlp.row(r).name, r);
  return m;
}

std::string key(const std::string& kind, const std::string& id, int t) {
  return kind + "[" + id + ",t=" + std::to_string(t) + "]";
}

std::vector<double> row_values(const NlpProblem& p, const std::vector<double>& x) {
  std::vector<double> g(static_cast<std::size_t>(p.nlp.num_rows()));
  p.nlp.rows(x, g);
  return g;
}

// Residuals recomputed in SI units straight from the physical trajectory.
void check_physical_residuals(const NlpProblem& p, const std::vector<double>& x) {
  const SolutionTrajectory tr = extract_trajectory(p, x);
  const auto g = row_values(p, x);
  const auto rows = row_lookup(p);
  const Network& net = p.segnet.net;
  const GasConstants& gas = p.scenario.gas;
  const int n = tr.steps();
  const double dt = p.grid.steady() ? 0.0 : p.grid.dt_seconds();
  double worst = 0.0;
  auto compare = [&](const std::string& name, double physical, double scale, double magnitude) {
    const auto it = rows.find(name);
    REQUIRE_MESSAGE(it != rows.end(), name);
    const double assembled = g[static_cast<std::size_t>(it->second)] * scale;
    const double err = std::abs(assembled - physical) / std::max(1.0, magnitude);
    worst = std::max(worst, err);
    CHECK_MESSAGE(err <= 1e-10, name << ": assembled " << assembled << " vs " << physical);
  };

  std::map<std::string, std::size_t> node_at;
  for (std::size_t k = 0; k < tr.nodes.size(); ++k) node_at[tr.nodes[k].id] = k;

  for (int t = 0; t < n; ++t) {
    const int tn = (t + 1) % n;
    for (std::size_t s = 0; s < net.pipes.size(); ++s) {
      const Pipe& pipe = net.pipes[s];
      const EdgeSeries& e = tr.edge(pipe.id);
      const NodeSeries& a = tr.nodes[node_at[pipe.from]];
      const NodeSeries& b = tr.nodes[node_at[pipe.to]];
      const auto tt = static_cast<std::size_t>(t);
      const auto nn = static_cast<std::size_t>(tn);
      double store_h2 = 0.0, store_ng = 0.0;
      if (dt > 0.0) {
        const double c = pipe.length * pipe.area / 2.0 / dt;
        store_h2 = c * (a.rho_h2[nn] + b.rho_h2[nn] - a.rho_h2[tt] - b.rho_h2[tt]);
        store_ng = c * (a.rho_ng[nn] + b.rho_ng[nn] - a.rho_ng[tt] - b.rho_ng[tt]);
      }
      const double f0 = e.f0[tt], fl = e.fl[tt], gl = e.gamma_l[tt], eta0 = a.eta[tt];
      const double mag = std::abs(f0) + std::abs(fl);
      compare(key("continuity_h2", pipe.id, t), store_h2 + gl * fl - eta0 * f0, p.flow_scale,
              mag + std::abs(store_h2));
      compare(key("continuity_ng", pipe.id, t), store_ng + (1 - gl) * fl - (1 - eta0) * f0,
              p.flow_scale, mag + std::abs(store_ng));

      const double phi = (f0 + fl) / 2.0 / pipe.area;
      const double rho_bar = (a.rho_h2[tt] + a.rho_ng[tt] + b.rho_h2[tt] + b.rho_ng[tt]) / 2.0;
      const double friction = pipe.lambda * pipe.length / (2.0 * pipe.diameter) * phi *
                              std::abs(phi) / rho_bar;
      compare(key("momentum", pipe.id, t), b.p[tt] - a.p[tt] + friction, p.scales.p0,
              a.p[tt] + b.p[tt] + std::abs(friction));
    }

    for (const Compressor& c : net.compressors) {
      const EdgeSeries& e = tr.edge(c.id);
      const double pi = tr.nodes[node_at[c.from]].p[static_cast<std::size_t>(t)];
      const double pj = tr.nodes[node_at[c.to]].p[static_cast<std::size_t>(t)];
      const double alpha = e.alpha[static_cast<std::size_t>(t)];
      compare(key("compressor_boost", c.id, t), pj * pj - alpha * alpha * pi * pi,
              p.scales.p0 * p.scales.p0, pj * pj + alpha * alpha * pi * pi);
    }

    for (const Node& nd : net.nodes) {
      const auto tt = static_cast<std::size_t>(t);
      const NodeSeries& ns = tr.nodes[node_at[nd.id]];
      double h2 = 0.0, ng = 0.0, mag = 0.0;
      for (const EdgeSeries& e : tr.edges) {
        if (e.to == nd.id) {
          h2 += e.gamma_l[tt] * e.fl[tt];
          ng += (1 - e.gamma_l[tt]) * e.fl[tt];
          mag += std::abs(e.fl[tt]);
        }
        if (e.from == nd.id) {
          h2 -= ns.eta[tt] * e.f0[tt];
          ng -= (1 - ns.eta[tt]) * e.f0[tt];
          mag += std::abs(e.f0[tt]);
        }
      }
      if (nd.is_supply() || nd.is_withdrawal()) {
        const TransferSeries& tx = tr.transfer(nd.id);
        h2 += tx.eta_s[tt] * tx.q_s[tt] - ns.eta[tt] * tx.q_w[tt];
        ng += (1 - tx.eta_s[tt]) * tx.q_s[tt] - (1 - ns.eta[tt]) * tx.q_w[tt];
        mag += tx.q_s[tt] + tx.q_w[tt];
      }
      compare(key("balance_h2", nd.id, t), h2, p.flow_scale, mag);
      compare(key("balance_ng", nd.id, t), ng, p.flow_scale, mag);

      const double rho = ns.rho_h2[tt] + ns.rho_ng[tt];
      compare(key("eta_definition", nd.id, t), ns.eta[tt] * rho - ns.rho_h2[tt], p.scales.rho0, rho);
      // recorded pressure against the mixture sound speed
      const double a2 = gas.a_h2 * gas.a_h2 * ns.eta[tt] + gas.a_ng * gas.a_ng * (1 - ns.eta[tt]);
      CHECK(std::abs(ns.p[tt] - a2 * rho) <= 1e-12 * ns.p[tt]);
      if (nd.is_slack()) {
        compare(key("slack_pressure", nd.id, t), ns.p[tt] - *nd.p_slack, p.scales.p0, ns.p[tt]);
      }
      if (nd.is_withdrawal()) {
        const TransferSeries& tx = tr.transfer(nd.id);
        const double e = tx.g_e[tt] - (ns.eta[tt] * gas.r_h2 + (1 - ns.eta[tt]) * gas.r_ng) * tx.q_w[tt];
        compare(key("energy", nd.id, t), e, p.energy_scale, tx.g_e[tt] + gas.r_h2 * tx.q_w[tt]);
      }
    }
  }
  MESSAGE("worst physical residual mismatch " << worst);
}

Scenario with_delta(Scenario s, double delta) {
  for (auto& [id, prof] : s.injection) {
    if (auto* sin = std::get_if<SinusoidProfile>(&prof)) sin->delta = delta;
  }
  return s;
}

}  // namespace

TEST_CASE("single pipe counting formula matches a hand tally") {
  // 3 original nodes + 2 auxiliary, 3 segments, 1 compressor, 1 supply, 1 withdrawal:
  // 3*5 + 3*3 + 2*1 + 1 + 2*1 = 29 variables per step.
  // 3 rows per segment, 1 per compressor, 2 balances and 1 eta definition per node,
  // 1 slack pressure, 1 energy: 9 + 1 + 15 + 1 + 1 = 27 equalities per step.
  const auto c = h2test::load_case("single_pipe");
  const NlpProblem p = h2test::assemble(c);
  CHECK(p.grid.steps == 48);
  CHECK(p.index.block() == 29);
  CHECK(p.nlp.num_variables() == 48 * 29);
  CHECK(p.equalities == 48 * 27);
  CHECK(p.inequalities == 48 * 5);
  CHECK(p.nlp.num_rows() == p.equalities + p.inequalities);

  std::map<int, int> per_kind;
  for (const Row& r : p.nlp.all_rows()) ++per_kind[r.tag];
  CHECK(per_kind[static_cast<int>(RowKind::continuity_h2)] == 48 * 3);
  CHECK(per_kind[static_cast<int>(RowKind::momentum)] == 48 * 3);
  CHECK(per_kind[static_cast<int>(RowKind::compressor_boost)] == 48);
  CHECK(per_kind[static_cast<int>(RowKind::balance_ng)] == 48 * 5);
  CHECK(per_kind[static_cast<int>(RowKind::eta_definition)] == 48 * 5);
  CHECK(per_kind[static_cast<int>(RowKind::slack_pressure)] == 48);
  CHECK(per_kind[static_cast<int>(RowKind::energy)] == 48);
  CHECK(per_kind[static_cast<int>(RowKind::energy_fixed)] == 0);

  const NlpProblem steady = h2test::assemble(c, true);
  CHECK(steady.nlp.num_variables() == 29);
  CHECK(steady.equalities == 27);
}

TEST_CASE("eight node counts follow the same formula") {
  const auto c = h2test::load_case("eight_node");
  const NlpProblem p = h2test::assemble(c);
  const int nodes = static_cast<int>(p.segnet.net.nodes.size());
  const int segs = static_cast<int>(p.segnet.net.pipes.size());
  const int per_step = 3 * nodes + 3 * segs + 2 * 3 + 2 + 2 * 2;
  CHECK(p.nlp.num_variables() == p.grid.steps * per_step);
  const int eq = 3 * segs + 3 + 3 * nodes + 1 + 2;
  CHECK(p.equalities == p.grid.steps * eq);
  // degrees of freedom per step: compressors + injections + withdrawals
  CHECK(per_step - eq == 3 + 1 + 2);
}

TEST_CASE("variables are laid out in time-major blocks") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"));
  const VariableIndex& ix = p.index;
  CHECK(ix.rho_h2(0, 1) == ix.block());
  CHECK(p.nlp.var_name(ix.f0(1, 2)) == "f0[P1/2,t=2]");
  CHECK(p.nlp.var_name(ix.qw(2, 5)) == "q_w[3,t=5]");
  CHECK(p.nlp.var_name(ix.alpha(0, 47)) == "alpha[C1,t=47]");
}

TEST_CASE("assembled rows equal the residuals written out in SI units") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const auto c = h2test::load_case(name);
    AssemblyOptions exact;
    exact.friction_eps = 0.0;
    for (bool steady : {false, true}) {
      const NlpProblem p = h2test::assemble(c, steady, exact);
      for (std::uint64_t seed : {1u, 2u}) {
        check_physical_residuals(p, random_interior_point(p, seed));
      }
    }
  }
}

TEST_CASE("reference kernels agree with the assembled rows") {
  const auto c = h2test::load_case("single_pipe");
  AssemblyOptions exact;
  exact.friction_eps = 0.0;
  const NlpProblem p = h2test::assemble(c, false, exact);
  const auto x = random_interior_point(p, 5);
  const auto g = row_values(p, x);
  const auto rows = row_lookup(p);
  const VariableIndex& ix = p.index;
  auto nv = [&](int i, int t) {
    return NodeValues{x[ix.rho_h2(i, t)], x[ix.rho_ng(i, t)], x[ix.eta(i, t)]};
  };
  for (int t = 0; t < p.grid.steps; ++t) {
    for (int s = 0; s < ix.segments; ++s) {
      const auto ss = static_cast<std::size_t>(s);
      const int i = p.seg_from[ss], j = p.seg_to[ss], tn = p.grid.succ(t);
      SegmentInput in{nv(i, t), nv(j, t), nv(i, tn), nv(j, tn),
                      x[ix.f0(s, t)], x[ix.fl(s, t)], x[ix.gamma_l(s, t)],
                      p.seg_length[ss], p.seg_area[ss], p.seg_beta[ss], p.scales.kappa,
                      p.grid.dt_seconds(), 0.0};
      const auto r = pipe_segment_residuals(in, p.gas);
      const std::string& id = p.segnet.net.pipes[ss].id;
      CHECK(r[0] == Approx(g[rows.at(key("continuity_h2", id, t))]).epsilon(1e-12));
      CHECK(r[1] == Approx(g[rows.at(key("continuity_ng", id, t))]).epsilon(1e-12));
      CHECK(r[2] == Approx(g[rows.at(key("momentum", id, t))]).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: momentum friction is odd in the flow") {
  const HatGas gas{2.8, 0.35, 3.2};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 30.0);
  for (int k = 0; k < 200; ++k) {
    SegmentInput in;
    in.from = {0.5, u(rng), 0.02};
    in.to = {0.4, u(rng), 0.03};
    in.f0 = u(rng) - 15.0;
    in.fl = u(rng) - 15.0;
    in.length = 10.0;
    in.area = 0.6;
    in.beta = 6e-4;
    const double p_diff = pressure_hat(in.to, gas) - pressure_hat(in.from, gas);
    const double forward = pipe_segment_residuals(in, gas)[2] - p_diff;
    in.f0 = -in.f0;
    in.fl = -in.fl;
    const double backward = pipe_segment_residuals(in, gas)[2] - p_diff;
    REQUIRE(std::abs(forward + backward) <= 1e-14 * std::max(1.0, std::abs(forward)));
  }
}

TEST_CASE("friction near zero flow") {
  const HatGas gas{2.8, 0.35, 3.2};
  SegmentInput in;
  in.from = {0.0, 10.0, 0.0};
  in.to = {0.0, 10.0, 0.0};
  in.length = 10.0;
  in.area = 1.0;
  in.beta = 0.5;
  for (double phi : {0.1, -0.1}) {
    in.f0 = in.fl = phi;
    // beta phi |phi| / rho_bar with rho_bar = 10
    CHECK(pipe_segment_residuals(in, gas)[2] == Approx(0.5 * phi * std::abs(phi) / 10.0).epsilon(1e-14));
  }
  in.f0 = in.fl = 0.0;
  CHECK(pipe_segment_residuals(in, gas)[2] == 0.0);
  in.from.rho_ng = in.to.rho_ng = 0.0;
  CHECK_THROWS_AS(pipe_segment_residuals(in, gas), EvaluationError);
}

TEST_CASE("steady homogeneous friction drop satisfies the momentum residual") {
  // p_L^2 = p_0^2 - 2 beta~ f^2 with constant a: pick p_0 and f, derive p_L.
  const HatGas gas{2.8, 0.35, 3.2};
  const double beta = 6.0756e-4, area = 0.6567, f = 29.2;
  const double phi = f / area;
  const double p0 = 4.5;
  const double pl = std::sqrt(p0 * p0 - 2.0 * gas.a2_ng * beta * phi * phi);
  SegmentInput in;
  in.from = {0.0, p0 / gas.a2_ng, 0.0};
  in.to = {0.0, pl / gas.a2_ng, 0.0};
  in.f0 = in.fl = f;
  in.area = area;
  in.beta = beta;
  in.length = 10.0;
  const auto r = pipe_segment_residuals(in, gas);
  CHECK(std::abs(r[2]) <= 1e-14);
  CHECK(std::abs(r[0]) <= 1e-14);
  CHECK(std::abs(r[1]) <= 1e-14);
}

TEST_CASE("two inflows at 5% and 15% mix to 10%") {
  BalanceInput in;
  in.inflows = {{50.0, 0.05}, {50.0, 0.15}};
  in.outflows = {100.0};
  in.eta = 0.10;
  auto r = nodal_balance_residuals(in);
  CHECK(std::abs(r[0]) <= 1e-13);
  CHECK(std::abs(r[1]) <= 1e-13);
  in.eta = 0.12;
  r = nodal_balance_residuals(in);
  CHECK(r[0] == Approx(-2.0).epsilon(1e-12));
  CHECK(r[1] == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("withdrawal node fed by one pipe balances") {
  BalanceInput in;
  in.inflows = {{148.26, 0.1}};
  in.q_w = 148.26;
  in.eta = 0.1;
  const auto r = nodal_balance_residuals(in);
  CHECK(std::abs(r[0]) <= 1e-12);
  CHECK(std::abs(r[1]) <= 1e-12);
}

TEST_CASE("property: species balances add up to the total mass balance") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> f(-50.0, 200.0), e(0.0, 0.3);
  for (int k = 0; k < 300; ++k) {
    BalanceInput in;
    double total = 0.0;
    for (int m = 0; m < 3; ++m) {
      in.inflows.push_back({f(rng), e(rng)});
      total += in.inflows.back().flow;
    }
    for (int m = 0; m < 2; ++m) {
      in.outflows.push_back(f(rng));
      total -= in.outflows.back();
    }
    in.eta = e(rng);
    in.eta_s = e(rng);
    in.q_s = std::abs(f(rng));
    in.q_w = std::abs(f(rng));
    total += in.q_s - in.q_w;
    const auto r = nodal_balance_residuals(in);
    REQUIRE(std::abs(r[0] + r[1] - total) <= 1e-11 * 1000.0);
  }
}

TEST_CASE("property: assembled species rows add up to the total mass balance") {
  const NlpProblem p = h2test::assemble(h2test::load_case("eight_node"));
  const auto x = random_interior_point(p, 23);
  const auto g = row_values(p, x);
  const auto rows = row_lookup(p);
  const VariableIndex& ix = p.index;
  for (int t = 0; t < p.grid.steps; ++t) {
    for (int j = 0; j < ix.nodes; ++j) {
      double total = 0.0;
      for (int s = 0; s < ix.segments; ++s) {
        if (p.seg_to[static_cast<std::size_t>(s)] == j) total += x[ix.fl(s, t)];
        if (p.seg_from[static_cast<std::size_t>(s)] == j) total -= x[ix.f0(s, t)];
      }
      for (int c = 0; c < ix.compressors; ++c) {
        if (p.comp_to[static_cast<std::size_t>(c)] == j) total += x[ix.fc(c, t)];
        if (p.comp_from[static_cast<std::size_t>(c)] == j) total -= x[ix.fc(c, t)];
      }
      if (ix.supply_slot[j] >= 0) total += x[ix.qs(j, t)];
      if (ix.withdrawal_slot[j] >= 0) total -= x[ix.qw(j, t)];
      const std::string& id = p.segnet.net.nodes[static_cast<std::size_t>(j)].id;
      const double sum = g[rows.at(key("balance_h2", id, t))] + g[rows.at(key("balance_ng", id, t))];
      REQUIRE(std::abs(sum - total) <= 1e-12 * std::max(1.0, std::abs(total)) * 100);
    }
  }
}

TEST_CASE("property: rows couple only a time step and its cyclic successor") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const NlpProblem p = h2test::assemble(h2test::load_case(name));
    const SparsePattern& jac = p.nlp.jacobian_pattern();
    const int block = p.index.block();
    for (int r = 0; r < jac.rows; ++r) {
      const Row& row = p.nlp.row(r);
      REQUIRE(row.time >= 0);
      const int t = row.time, tn = p.grid.succ(t);
      bool uses_next = false;
      for (int k = jac.row_ptr[r]; k < jac.row_ptr[r + 1]; ++k) {
        const int b = jac.col[static_cast<std::size_t>(k)] / block;
        REQUIRE((b == t || b == tn));
        uses_next = uses_next || (b == tn && tn != t);
      }
      const bool storage = row.tag == static_cast<int>(RowKind::continuity_h2) ||
                           row.tag == static_cast<int>(RowKind::continuity_ng);
      CHECK(uses_next == storage);
    }
    // the last step wraps to the first
    bool wraps = false;
    for (int r = 0; r < jac.rows; ++r) {
      if (p.nlp.row(r).time != p.grid.steps - 1) continue;
      for (int k = jac.row_ptr[r]; k < jac.row_ptr[r + 1]; ++k) {
        wraps = wraps || jac.col[static_cast<std::size_t>(k)] < block;
      }
    }
    CHECK(wraps);
  }
}

TEST_CASE("property: a replicated steady point is transient feasible when the data is constant") {
  auto c = h2test::load_case("single_pipe");
  c.scenario = with_delta(c.scenario, 0.0);
  const NlpProblem steady = h2test::assemble(c, true);
  const NlpProblem p = h2test::assemble(c);
  const auto steady_rows = row_lookup(steady);
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto xs = random_interior_point(steady, seed);
    const auto gs = row_values(steady, xs);
    const auto g = row_values(p, replicate_steady(p, xs));
    for (int r = 0; r < p.nlp.num_rows(); ++r) {
      const Row& row = p.nlp.row(r);
      const std::string base = row.name.substr(0, row.name.find(",t="));
      const double ref = gs[steady_rows.at(base + ",t=0]")];
      REQUIRE(std::abs(g[static_cast<std::size_t>(r)] - ref) <= 1e-10);
    }
  }
}

TEST_CASE("property: from a replicated steady point only the injection data mismatch remains") {
  const auto c = h2test::load_case("single_pipe");
  const NlpProblem steady = h2test::assemble(c, true);
  const NlpProblem p = h2test::assemble(c);
  const auto steady_rows = row_lookup(steady);
  const auto xs = random_interior_point(steady, 9);
  const auto gs = row_values(steady, xs);
  const auto x = replicate_steady(p, xs);
  const auto g = row_values(p, x);
  const double qs = xs[steady.index.qs(0, 0)];
  int mismatched = 0;
  for (int r = 0; r < p.nlp.num_rows(); ++r) {
    const Row& row = p.nlp.row(r);
    const std::string base = row.name.substr(0, row.name.find(",t="));
    const double diff = g[static_cast<std::size_t>(r)] - gs[steady_rows.at(base + ",t=0]")];
    double expected = 0.0;
    if (base == "balance_h2[1" || base == "balance_ng[1") {
      const double d_eta = c.scenario.supply_fraction("1", p.grid.time(row.time)) -
                           c.scenario.supply_fraction("1", 0.0);
      expected = (base == "balance_h2[1" ? 1.0 : -1.0) * d_eta * qs;
      if (d_eta != 0.0) ++mismatched;
    }
    REQUIRE(std::abs(diff - expected) <= 1e-12);
  }
  CHECK(mismatched > 0);
}

TEST_CASE("property: with zero electricity price the objective ignores compressor ratios") {
  auto c = h2test::load_case("eight_node");
  c.scenario.prices.zeta = 0.0;
  const NlpProblem p = h2test::assemble(c);
  auto x = random_interior_point(p, 31);
  const double before = p.nlp.objective(x);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  for (int t = 0; t < p.grid.steps; ++t) {
    for (int k = 0; k < p.index.compressors; ++k) x[p.index.alpha(k, t)] = u(rng);
  }
  CHECK(p.nlp.objective(x) == before);
  CHECK(evaluate_objective(p, x).compression == 0.0);
}

TEST_CASE("objective breakdown matches the scaled NLP objective") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const NlpProblem p = h2test::assemble(h2test::load_case(name));
    const auto x = random_interior_point(p, 41);
    const ObjectiveBreakdown o = evaluate_objective(p, x);
    CHECK(o.total == Approx(p.nlp.objective(x) * p.objective_scale).epsilon(1e-12));
    CHECK(o.total == Approx(p.scenario.xi * o.economic + (1 - p.scenario.xi) * o.compression));
    CHECK(o.compression > 0.0);
  }
}

TEST_CASE("compressor boost for 4.337 to 6.0 MPa") {
  const double alpha = 6.0 / 4.337;
  CHECK(alpha == Approx(1.383444777495965).epsilon(1e-14));
  CHECK(std::abs(compressor_residual(4.337, 6.0, alpha)) <= 1e-13);
  CHECK(compressor_residual(4.337, 6.0, 1.0) > 0.0);
}

TEST_CASE("slack, definition and energy kernels") {
  const GasConstants physical{};
  const NondimScales sc = nondim_scales(1000.0, 1e6, 1.0 / 300.0, physical);
  const HatGas gas = HatGas::from(physical, sc);
  const MixtureState s = state_from_pressure(4.337e6, 0.1, physical);
  const NodeValues v{s.rho_h2 / sc.rho0, s.rho_ng / sc.rho0, 0.1};
  CHECK(std::abs(slack_pressure_residual(v, 4.337, gas)) <= 1e-13);
  CHECK(pressure_hat(v, gas) == Approx(4.337).epsilon(1e-14));
  CHECK(std::abs(eta_definition_residual(v)) <= 1e-14);
  CHECK(std::abs(energy_residual(0.1, 148.25796886582654, 8000.0, physical)) <= 1e-10);
  CHECK(energy_residual(0.1, 100.0, 0.0, physical) == Approx(-5396.0));
}

TEST_CASE("cyclic derivative of a sampled sinusoid") {
  const int n = 24;
  const double dt = 0.5;
  std::vector<double> x(n);
  for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k)] = std::sin(2 * std::numbers::pi * k / n);
  const auto d = cyclic_derivative(x, dt);
  for (int k = 0; k < n; ++k) {
    const double next = std::sin(2 * std::numbers::pi * ((k + 1) % n) / n);
    CHECK(d[static_cast<std::size_t>(k)] == Approx((next - x[static_cast<std::size_t>(k)]) / dt).epsilon(1e-14));
  }
  CHECK(cyclic_forward_difference(3.0, 1.0, 0.5) == 4.0);
  CHECK_THROWS_AS(cyclic_forward_difference(3.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("initial point respects bounds and the slack pressure") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const NlpProblem p = h2test::assemble(h2test::load_case(name), true);
    const auto x = initial_point(p);
    REQUIRE(x.size() == static_cast<std::size_t>(p.nlp.num_variables()));
    for (int v = 0; v < p.nlp.num_variables(); ++v) {
      CHECK(x[v] >= p.nlp.var_lower()[v]);
      CHECK(x[v] <= p.nlp.var_upper()[v]);
    }
    const auto rows = row_lookup(p);
    const auto g = row_values(p, x);
    for (const Node& nd : p.segnet.net.nodes) {
      if (nd.is_slack()) CHECK(std::abs(g[rows.at(key("slack_pressure", nd.id, 0))]) <= 1e-12);
    }
  }
}

TEST_CASE("replicating a steady solution copies its block") {
  const auto c = h2test::load_case("single_pipe");
  const NlpProblem steady = h2test::assemble(c, true);
  const NlpProblem p = h2test::assemble(c);
  const auto xs = random_interior_point(steady, 8);
  const auto x = replicate_steady(p, xs);
  REQUIRE(x.size() == static_cast<std::size_t>(p.nlp.num_variables()));
  for (int t = 0; t < p.grid.steps; ++t) {
    for (int k = 0; k < p.index.block(); ++k) {
      REQUIRE(x[static_cast<std::size_t>(t * p.index.block() + k)] == xs[static_cast<std::size_t>(k)]);
    }
  }
  CHECK_THROWS_AS(replicate_steady(p, std::vector<double>(3, 0.0)), AssemblyError);
}

TEST_CASE("assembly rejects inconsistent data") {
  auto c = h2test::load_case("single_pipe");
  auto bad = c;
  bad.net.nodes[0].p_slack = 7e6;
  CHECK_THROWS_AS(h2test::assemble(bad), AssemblyError);
  bad = c;
  bad.net.nodes[1].p_min = 7e6;
  CHECK_THROWS_AS(h2test::assemble(bad), AssemblyError);
  bad = c;
  bad.net.compressors[0].alpha_max = 0.5;
  CHECK_THROWS_AS(h2test::assemble(bad), AssemblyError);
}

TEST_CASE("fixed withdrawal mode adds one row per step") {
  auto c = h2test::load_case("single_pipe");
  c.scenario.withdrawal["3"] = WithdrawalSpec{EnergyMode::fixed, ConstantProfile{8000.0}};
  const NlpProblem p = h2test::assemble(c);
  int fixed = 0;
  for (const Row& r : p.nlp.all_rows()) fixed += r.tag == static_cast<int>(RowKind::energy_fixed);
  CHECK(fixed == p.grid.steps);
  CHECK(p.equalities == p.grid.steps * 28);
}

TEST_CASE("debug export lists every variable, row and Jacobian entry") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"), true);
  const auto dir = std::filesystem::temp_directory_path() / "h2blend_export_test";
  std::filesystem::remove_all(dir);
  export_nlp_csv(p, dir);
  auto lines = [](const std::filesystem::path& f) {
    std::ifstream in(f);
    std::string s;
    std::size_t n = 0;
    while (std::getline(in, s)) ++n;
    return n;
  };
  CHECK(lines(dir / "nlp_variables.csv") == 1 + static_cast<std::size_t>(p.nlp.num_variables()));
  CHECK(lines(dir / "nlp_constraints.csv") == 1 + static_cast<std::size_t>(p.nlp.num_rows()));
  CHECK(lines(dir / "nlp_jacobian.csv") == 1 + p.nlp.jacobian_pattern().nnz());
  std::filesystem::remove_all(dir);
}
