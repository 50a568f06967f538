#include "h2blend/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <variant>

#include <json.hpp>

namespace h2blend {

// ---------------------------------------------------------------------------
// Report

bool AuditReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.pass; });
}

const AuditCheck* AuditReport::find(const std::string& name) const {
  for (const AuditCheck& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void AuditReport::add(std::string name, double value, double tolerance, std::string detail) {
  // NaN never passes.
  checks.push_back({std::move(name), value <= tolerance, value, tolerance, std::move(detail)});
}

void AuditReport::merge(const AuditReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

std::string AuditReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass"] = pass();
  j["checks"] = nlohmann::ordered_json::array();
  for (const AuditCheck& c : checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["value"] = c.value;
    e["tolerance"] = c.tolerance;
    if (!c.detail.empty()) e["detail"] = c.detail;
    j["checks"].push_back(std::move(e));
  }
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string AuditReport::to_text() const {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  std::size_t width = 0;
  for (const AuditCheck& c : checks) width = std::max(width, c.name.size());
  for (const AuditCheck& c : checks) {
    s << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(static_cast<int>(width)) << c.name
      << "  " << std::scientific << std::setprecision(3) << c.value << " <= " << c.tolerance;
    if (!c.detail.empty()) s << "  (" << c.detail << ")";
    s << '\n';
  }
  for (const std::string& w : warnings) s << "WARN " << w << '\n';
  s << "overall: " << (pass() ? "pass" : "fail") << '\n';
  return s.str();
}

// ---------------------------------------------------------------------------
// Feasibility

namespace {

// Largest violation seen for one check, with where it happened.
struct Worst {
  double value = 0.0;
  std::string where;

  void see(double v, const std::string& id, double t) {
    const double a = std::isnan(v) ? std::numeric_limits<double>::infinity() : std::abs(v);
    if (a > value || (where.empty() && a > 0.0)) {
      value = a;
      std::ostringstream s;
      s.imbue(std::locale::classic());
      s << id << " at t=" << t << " h";
      where = s.str();
    }
  }
};

double excess(double v, double lo, double hi) { return std::max({lo - v, v - hi, 0.0}); }

}  // namespace

AuditReport check_feasibility(const SolutionTrajectory& tr, const SegmentedNetwork& segnet,
                              const Scenario& scenario, double tol) {
  const TimeGrid grid = build_time_grid(tr.horizon_h, tr.dt_h);
  AssemblyOptions exact;
  exact.friction_eps = 0.0;
  const NlpProblem p = assemble_nlp(segnet, scenario, grid, exact);
  const std::vector<double> x = trajectory_variables(p, tr);
  const VariableIndex& ix = p.index;
  const Network& net = p.segnet.net;
  const double fs = p.flow_scale;
  const double es = p.energy_scale;
  const double p0 = p.scales.p0;
  auto at = [&](int v) { return x[static_cast<std::size_t>(v)]; };
  auto node_at = [&](int i, int t) {
    return NodeValues{at(ix.rho_h2(i, t)), at(ix.rho_ng(i, t)), at(ix.eta(i, t))};
  };
  GasConstants hat_energy = scenario.gas;
  hat_energy.r_h2 = p.gas.r_h2;
  hat_energy.r_ng = 1.0;

  std::map<std::string, Worst> res;
  std::map<std::string, Worst> bound;
  for (const char* k : {"continuity_h2", "continuity_ng", "momentum", "compressor_boost",
                        "balance_h2", "balance_ng", "eta_definition", "slack_pressure", "energy",
                        "energy_fixed", "equation_of_state"}) {
    res[k];
  }
  for (const char* k : {"pressure", "density", "eta", "gamma_L", "alpha", "compressor_flow",
                        "supply_flow", "withdrawal_flow", "energy"}) {
    bound[k];
  }

  for (int t = 0; t < ix.steps; ++t) {
    const int tn = grid.succ(t);
    const double time = grid.time(t);
    const auto ts = static_cast<std::size_t>(t);
    for (int s = 0; s < ix.segments; ++s) {
      const auto ss = static_cast<std::size_t>(s);
      const std::string& id = net.pipes[ss].id;
      const int i = p.seg_from[ss];
      const int j = p.seg_to[ss];
      SegmentInput in;
      in.from = node_at(i, t);
      in.to = node_at(j, t);
      in.from_next = node_at(i, tn);
      in.to_next = node_at(j, tn);
      in.f0 = at(ix.f0(s, t));
      in.fl = at(ix.fl(s, t));
      in.gamma_l = at(ix.gamma_l(s, t));
      in.length = p.seg_length[ss];
      in.area = p.seg_area[ss];
      in.beta = p.seg_beta[ss];
      in.kappa = p.scales.kappa;
      in.dt_s = grid.steady() ? 0.0 : grid.dt_seconds();
      in.eps = 0.0;
      const auto r = pipe_segment_residuals(in, p.gas);
      res["continuity_h2"].see(r[0], id, time);
      res["continuity_ng"].see(r[1], id, time);
      res["momentum"].see(r[2], id, time);
      bound["gamma_L"].see(excess(in.gamma_l, 0.0, 1.0), id, time);
    }
    for (int c = 0; c < ix.compressors; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const Compressor& comp = net.compressors[cs];
      const double a = at(ix.alpha(c, t));
      const double pin = pressure_hat(node_at(p.comp_from[cs], t), p.gas);
      const double pout = pressure_hat(node_at(p.comp_to[cs], t), p.gas);
      res["compressor_boost"].see(compressor_residual(pin, pout, a), comp.id, time);
      bound["alpha"].see(excess(a, 1.0, comp.alpha_max), comp.id, time);
      bound["compressor_flow"].see(excess(at(ix.fc(c, t)), 0.0, comp.fc_max / fs), comp.id, time);
    }
    for (int j = 0; j < ix.nodes; ++j) {
      const Node& nd = net.nodes[static_cast<std::size_t>(j)];
      const NodeValues v = node_at(j, t);
      BalanceInput bal;
      bal.eta = v.eta;
      for (int s = 0; s < ix.segments; ++s) {
        const auto ss = static_cast<std::size_t>(s);
        if (p.seg_to[ss] == j) bal.inflows.push_back({at(ix.fl(s, t)), at(ix.gamma_l(s, t))});
        if (p.seg_from[ss] == j) bal.outflows.push_back(at(ix.f0(s, t)));
      }
      for (int c = 0; c < ix.compressors; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        if (p.comp_to[cs] == j) {
          bal.inflows.push_back({at(ix.fc(c, t)), at(ix.eta(p.comp_from[cs], t))});
        }
        if (p.comp_from[cs] == j) bal.outflows.push_back(at(ix.fc(c, t)));
      }
      if (nd.is_supply()) {
        bal.eta_s = scenario.supply_fraction(nd.id, time);
        bal.q_s = at(ix.qs(j, t));
        bound["supply_flow"].see(excess(bal.q_s, 0.0, nd.q_s_max / fs), nd.id, time);
      }
      if (nd.is_withdrawal()) {
        bal.q_w = at(ix.qw(j, t));
        bound["withdrawal_flow"].see(excess(bal.q_w, 0.0, kInf), nd.id, time);
      }
      const auto b = nodal_balance_residuals(bal);
      res["balance_h2"].see(b[0], nd.id, time);
      res["balance_ng"].see(b[1], nd.id, time);
      res["eta_definition"].see(eta_definition_residual(v), nd.id, time);

      const double ph = pressure_hat(v, p.gas);
      const double recorded = tr.node(nd.id).p[ts] / p0;
      res["equation_of_state"].see(recorded - ph, nd.id, time);
      bound["pressure"].see(excess(recorded, nd.p_min / p0, nd.p_max / p0), nd.id, time);
      bound["density"].see(excess(std::min(v.rho_h2, v.rho_ng), 0.0, kInf), nd.id, time);
      bound["eta"].see(excess(v.eta, 0.0, 1.0), nd.id, time);
      if (nd.is_slack()) {
        res["slack_pressure"].see(slack_pressure_residual(v, *nd.p_slack / p0, p.gas), nd.id,
                                  time);
      }
      if (nd.is_withdrawal()) {
        const double g = at(ix.ge(j, t));
        res["energy"].see(energy_residual(v.eta, bal.q_w, g, hat_energy), nd.id, time);
        const WithdrawalSpec spec = scenario.withdrawal_spec(nd);
        const double level = evaluate_profile(spec.profile, time, grid.horizon_h) / es;
        if (spec.mode == EnergyMode::fixed) {
          res["energy_fixed"].see(g - level, nd.id, time);
          bound["energy"].see(excess(g, 0.0, kInf), nd.id, time);
        } else {
          bound["energy"].see(excess(g, 0.0, level), nd.id, time);
        }
      }
    }
  }

  AuditReport report;
  for (const auto& [kind, w] : res) report.add("residual." + kind, w.value, tol, w.where);
  for (const auto& [kind, w] : bound) report.add("bound." + kind, w.value, tol, w.where);
  return report;
}

// ---------------------------------------------------------------------------
// Conservation

SpeciesBalance conservation_audit(const SolutionTrajectory& tr, const SegmentedNetwork& segnet,
                                  const Scenario& scenario) {
  (void)scenario;  // supply concentrations are recorded in the trajectory
  const double dt_s = tr.dt_h * 3600.0;
  SpeciesBalance b;
  for (const TransferSeries& s : tr.transfers) {
    const std::size_t k = segnet.net.node_index(s.node);
    if (k == Network::npos) throw std::invalid_argument("conservation_audit: unknown node " + s.node);
    const Node& nd = segnet.net.nodes[k];
    const NodeSeries& ns = tr.node(s.node);
    for (std::size_t t = 0; t < tr.time_h.size(); ++t) {
      if (nd.is_supply()) {
        b.h2_in += s.eta_s[t] * s.q_s[t] * dt_s;
        b.ng_in += (1.0 - s.eta_s[t]) * s.q_s[t] * dt_s;
        b.throughput += s.q_s[t] * dt_s;
      }
      if (nd.is_withdrawal()) {
        b.h2_out += ns.eta[t] * s.q_w[t] * dt_s;
        b.ng_out += (1.0 - ns.eta[t]) * s.q_w[t] * dt_s;
      }
    }
  }
  const double denom = b.throughput > 0.0 ? b.throughput : 1.0;
  b.h2_relative = std::abs(b.h2_in - b.h2_out) / denom;
  b.ng_relative = std::abs(b.ng_in - b.ng_out) / denom;
  return b;
}

// ---------------------------------------------------------------------------
// Periodicity

namespace {

// Integer frequency of a profile: 0 for constants, -1 when not periodic on a divisor of T.
long profile_frequency(const Profile& profile) {
  if (std::holds_alternative<ConstantProfile>(profile)) return 0;
  if (const auto* s = std::get_if<SinusoidProfile>(&profile)) {
    if (s->delta == 0.0) return 0;
    const double nu = std::abs(s->nu);
    if (nu == 0.0) return 0;
    if (std::abs(nu - std::round(nu)) > 1e-12) return -1;
    return std::lround(nu);
  }
  const auto& series = std::get<SeriesProfile>(profile);
  const bool constant = std::adjacent_find(series.values.begin(), series.values.end(),
                                           std::not_equal_to<>()) == series.values.end();
  return constant ? 0 : -1;
}

}  // namespace

double data_period(const Scenario& scenario) {
  long g = 0;
  auto take = [&](const Profile& profile) {
    const long f = profile_frequency(profile);
    if (f < 0) {
      g = 1;
    } else if (f > 0) {
      g = std::gcd(g, f);
    }
  };
  for (const auto& [id, prof] : scenario.injection) take(prof);
  for (const auto& [id, spec] : scenario.withdrawal) take(spec.profile);
  return g > 1 ? scenario.horizon_h / static_cast<double>(g) : scenario.horizon_h;
}

PeriodicityResult periodicity(const SolutionTrajectory& tr, double period_h) {
  PeriodicityResult r;
  r.period_h = period_h;
  const int n = tr.steps();
  if (!(tr.dt_h > 0.0) || n < 2) return r;
  const double ratio = period_h / tr.dt_h;
  const long shift = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(shift)) > 1e-9 || shift <= 0 || shift >= n ||
      n % shift != 0) {
    return r;
  }
  r.applicable = true;
  r.shift_steps = static_cast<int>(shift);
  auto visit = [&](const std::string& name, const std::vector<double>& series) {
    double scale = 0.0;
    for (double v : series) {
      if (!std::isnan(v)) scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) return;
    for (int t = 0; t < n; ++t) {
      const double a = series[static_cast<std::size_t>(t)];
      const double b = series[static_cast<std::size_t>((t + shift) % n)];
      if (std::isnan(a) && std::isnan(b)) continue;
      const double d = std::abs(a - b) / scale;
      if (!(d <= r.max_relative)) {
        r.max_relative = std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
        r.worst_series = name;
      }
    }
  };
  for (const NodeSeries& s : tr.nodes) {
    visit("rho_H2[" + s.id + "]", s.rho_h2);
    visit("rho_NG[" + s.id + "]", s.rho_ng);
    visit("eta[" + s.id + "]", s.eta);
    visit("p[" + s.id + "]", s.p);
  }
  for (const EdgeSeries& e : tr.edges) {
    visit("f0[" + e.id + "]", e.f0);
    visit("fL[" + e.id + "]", e.fl);
    visit("gamma_L[" + e.id + "]", e.gamma_l);
    if (e.type == EdgeType::compressor) visit("alpha[" + e.id + "]", e.alpha);
  }
  for (const TransferSeries& s : tr.transfers) {
    visit("q_s[" + s.node + "]", s.q_s);
    visit("q_w[" + s.node + "]", s.q_w);
    visit("g_E[" + s.node + "]", s.g_e);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Flow direction

FlowDirectionResult flow_direction_audit(const SolutionTrajectory& tr, double tol) {
  FlowDirectionResult r;
  for (const EdgeSeries& e : tr.edges) {
    if (e.type != EdgeType::pipe) continue;
    bool negative = false;
    for (const auto* series : {&e.f0, &e.fl}) {
      for (double f : *series) negative = negative || f < -tol;
    }
    if (negative) r.against_orientation.push_back(e.id);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lag

LagResult lag_between(std::span<const double> up, std::span<const double> down, double dt_h) {
  LagResult r;
  const std::size_t n = up.size();
  if (n == 0 || down.size() != n) {
    r.reason = "series are empty or differ in length";
    return r;
  }
  const double mu = std::accumulate(up.begin(), up.end(), 0.0) / static_cast<double>(n);
  const double md = std::accumulate(down.begin(), down.end(), 0.0) / static_cast<double>(n);
  std::vector<double> u(n);
  std::vector<double> d(n);
  double nu = 0.0;
  double nd = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = up[k] - mu;
    d[k] = down[k] - md;
    nu += u[k] * u[k];
    nd += d[k] * d[k];
  }
  const double floor = 1e-24 * static_cast<double>(n);
  if (nu <= floor * std::max(1.0, mu * mu) || nd <= floor * std::max(1.0, md * md)) {
    r.reason = "a series is constant";
    return r;
  }
  std::vector<double> corr(n, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) corr[k] += u[t] * d[(t + k) % n];
    best = std::max(best, corr[k]);
  }
  // periodic series tie at every multiple of the period; take the shortest shift
  const double tie = best - 1e-9 * std::sqrt(nu * nd);
  auto signed_shift = [n](std::size_t k) {
    return k > n / 2 ? static_cast<long>(k) - static_cast<long>(n) : static_cast<long>(k);
  };
  std::size_t arg = 0;
  bool found = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (corr[k] < tie) continue;
    if (!found || std::labs(signed_shift(k)) < std::labs(signed_shift(arg))) arg = k;
    found = true;
  }
  best = corr[arg];
  r.defined = true;
  const long shift = signed_shift(arg);
  r.shift_steps = static_cast<int>(shift);
  r.lag_h = static_cast<double>(shift) * dt_h;
  r.correlation = best / std::sqrt(nu * nd);
  return r;
}

LagResult lag_analysis(const SolutionTrajectory& tr, const std::string& upstream,
                       const std::string& downstream) {
  return lag_between(tr.node(upstream).eta, tr.node(downstream).eta, tr.dt_h);
}

// ---------------------------------------------------------------------------
// Derivatives

std::vector<double> random_interior_point(const NlpProblem& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };
  const VariableIndex& ix = p.index;
  const std::vector<double> base = initial_point(p);
  const auto lo = p.nlp.var_lower();
  const auto hi = p.nlp.var_upper();
  std::vector<double> x(base);

  std::vector<char> is_flow(x.size(), 0);
  std::vector<char> is_density(x.size(), 0);
  for (int t = 0; t < ix.steps; ++t) {
    for (int s = 0; s < ix.segments; ++s) {
      is_flow[static_cast<std::size_t>(ix.f0(s, t))] = 1;
      is_flow[static_cast<std::size_t>(ix.fl(s, t))] = 1;
    }
    for (int i = 0; i < ix.nodes; ++i) {
      is_density[static_cast<std::size_t>(ix.rho_h2(i, t))] = 1;
      is_density[static_cast<std::size_t>(ix.rho_ng(i, t))] = 1;
    }
  }
  for (std::size_t v = 0; v < x.size(); ++v) {
    const double ref = std::max(1.0, std::abs(base[v]));
    if (is_flow[v]) {
      const double sign = base[v] < 0.0 ? -1.0 : 1.0;
      x[v] = sign * uniform(0.2, 2.0) * ref;
    } else if (is_density[v]) {
      x[v] = std::max(base[v], 1e-3) * uniform(0.8, 1.2);
    } else if (std::isfinite(lo[v]) && std::isfinite(hi[v])) {
      const double w = hi[v] - lo[v];
      x[v] = w > 0.0 ? uniform(lo[v] + 0.05 * w, hi[v] - 0.05 * w) : lo[v];
    } else if (std::isfinite(lo[v])) {
      x[v] = lo[v] + uniform(0.1, 2.0) * ref;
    } else if (std::isfinite(hi[v])) {
      x[v] = hi[v] - uniform(0.1, 2.0) * ref;
    } else {
      x[v] = base[v] + uniform(-1.0, 1.0) * ref;
    }
  }
  return x;
}

DerivativeCheckResult derivative_check(const NlpProblem& p, int n_points, double step,
                                       std::uint64_t seed) {
  const ExprNlp& nlp = p.nlp;
  const int n = nlp.num_variables();
  const int m = nlp.num_rows();
  const SparsePattern& pat = nlp.jacobian_pattern();
  std::vector<std::vector<std::pair<int, int>>> by_col(static_cast<std::size_t>(n));
  for (int r = 0; r < m; ++r) {
    for (int k = pat.row_ptr[static_cast<std::size_t>(r)];
         k < pat.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
      by_col[static_cast<std::size_t>(pat.col[static_cast<std::size_t>(k)])].emplace_back(r, k);
    }
  }

  DerivativeCheckResult out;
  std::vector<double> jac(pat.nnz());
  std::vector<double> grad(static_cast<std::size_t>(n));
  for (int point = 0; point < n_points; ++point) {
    std::vector<double> x = random_interior_point(p, seed + static_cast<std::uint64_t>(point));
    nlp.jacobian_values(x, jac);
    nlp.objective_gradient(x, grad);
    for (int j = 0; j < n; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double xj = x[js];
      x[js] = xj + step;
      const double fp = nlp.objective(x);
      std::vector<double> gp;
      gp.reserve(by_col[js].size());
      for (const auto& [r, k] : by_col[js]) gp.push_back(nlp.row_value(r, x));
      x[js] = xj - step;
      const double fm = nlp.objective(x);
      for (std::size_t q = 0; q < by_col[js].size(); ++q) {
        const auto [r, k] = by_col[js][q];
        const double fd = (gp[q] - nlp.row_value(r, x)) / (2.0 * step);
        const double a = jac[static_cast<std::size_t>(k)];
        const double e = std::abs(fd - a) / std::max(1.0, std::abs(a));
        if (e > out.jacobian) {
          out.jacobian = e;
          out.worst_row = r;
          out.worst_col = j;
        }
      }
      x[js] = xj;
      const double gfd = (fp - fm) / (2.0 * step);
      out.gradient = std::max(out.gradient, std::abs(gfd - grad[js]) / std::max(1.0, std::abs(grad[js])));
    }
    ++out.points;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Combined audit

AuditReport audit_solution(const SolutionTrajectory& tr, const SegmentedNetwork& segnet,
                           const Scenario& scenario, const AuditOptions& options) {
  AuditReport report = check_feasibility(tr, segnet, scenario, options.feasibility_tol);

  const SpeciesBalance b = conservation_audit(tr, segnet, scenario);
  report.add("conservation.h2", b.h2_relative, options.conservation_tol, "relative to throughput");
  report.add("conservation.ng", b.ng_relative, options.conservation_tol, "relative to throughput");

  const PeriodicityResult per = periodicity(tr, data_period(scenario));
  if (per.applicable) {
    std::ostringstream detail;
    detail.imbue(std::locale::classic());
    detail << "period " << per.period_h << " h, worst " << per.worst_series;
    if (options.enforce_periodicity) {
      report.add("periodicity", per.max_relative, options.periodicity_tol, detail.str());
    } else if (!(per.max_relative <= options.periodicity_tol)) {
      std::ostringstream w;
      w.imbue(std::locale::classic());
      w << "solution is not periodic with the data: max relative shift difference "
        << std::scientific << std::setprecision(3) << per.max_relative << " (" << detail.str()
        << ")";
      report.warnings.push_back(w.str());
    }
  }

  const FlowDirectionResult dir = flow_direction_audit(tr);
  if (!dir.verified()) {
    std::string ids;
    for (const std::string& id : dir.against_orientation) ids += (ids.empty() ? "" : ", ") + id;
    report.warnings.push_back(
        "flow against segment orientation in " + ids +
        "; the inlet-concentration assumption of the segment model is unverified there");
  }
  return report;
}

}  // namespace h2blend
