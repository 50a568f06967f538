#include "h2blend/run.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "h2blend/errors.hpp"

namespace h2blend {

const char* mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::steady: return "steady";
    case RunMode::transient: return "transient";
    case RunMode::validate_only: return "validate-only";
  }
  return "transient";
}

RunMode parse_mode(std::string_view text) {
  if (text == "steady") return RunMode::steady;
  if (text == "transient") return RunMode::transient;
  if (text == "validate-only") return RunMode::validate_only;
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected steady, transient or validate-only)");
}

void RunConfig::validate() const {
  if (network.empty()) throw ConfigError("no network file given");
  if (scenario.empty()) throw ConfigError("no scenario file given");
  auto positive = [](const std::optional<double>& v, const char* what) {
    if (v && !(std::isfinite(*v) && *v > 0.0)) {
      throw ConfigError(std::string(what) + " must be a positive number");
    }
  };
  positive(dt_h, "--dt");
  positive(dl_m, "--dl");
  positive(tol, "--tol");
  if (xi && !(*xi >= 0.0 && *xi <= 1.0)) throw ConfigError("--xi must lie in [0, 1]");
  if (derivative_points < 0) throw ConfigError("derivative_points must be non-negative");
}

std::filesystem::path default_output_dir() {
  const char* env = std::getenv("H2BLEND_OUT_DIR");
  if (env != nullptr && *env != '\0') return env;
  return "out";
}

namespace {

int exit_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::local_optimum: return kExitOk;
    case SolveStatus::infeasible: return kExitInfeasible;
    case SolveStatus::iteration_limit: return kExitIterationLimit;
    case SolveStatus::error: return kExitSolverError;
  }
  return kExitSolverError;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::ordered_json stage_json(const SolveResult& r) {
  nlohmann::ordered_json j;
  j["status"] = status_name(r.status);
  j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["warm_started"] = r.warm_started;
  j["nlp_objective"] = r.objective;
  j["constraint_violation"] = r.constraint_violation;
  j["kkt_stationarity"] = r.kkt.stationarity;
  j["kkt_feasibility"] = r.kkt.feasibility;
  j["kkt_complementarity"] = r.kkt.complementarity;
  return j;
}

void log_stage(std::ostream& log, const char* stage, const SolveResult& r) {
  log << stage << ": " << status_name(r.status) << " after " << r.iterations << " iterations ("
      << r.wall_time_s << " s), violation " << r.constraint_violation << ", KKT " << r.kkt.max()
      << "\n";
}

struct Pipeline {
  const RunConfig& cfg;
  std::ostream& log;
  RunOutcome out;
  SolverOptions solver;
  Scenario scenario;
  SegmentedNetwork segnet;

  void add_derivative_checks(const NlpProblem& problem, const char* stage) {
    if (cfg.derivative_points == 0) return;
    const DerivativeCheckResult d = derivative_check(problem, cfg.derivative_points, 1e-6);
    const std::string detail = std::to_string(d.points) + " random points";
    out.audit.add(std::string("derivatives.") + stage + ".jacobian", d.jacobian, 1e-6, detail);
    out.audit.add(std::string("derivatives.") + stage + ".gradient", d.gradient, 1e-6, detail);
  }

  void write_common(const nlohmann::ordered_json& summary) {
    write_text(out.out_dir / "audit.json", out.audit.to_json());
    write_text(out.out_dir / "audit.txt", out.audit.to_text());
    write_text(out.out_dir / "summary.json", summary.dump(2) + "\n");
  }

  nlohmann::ordered_json base_summary() const {
    nlohmann::ordered_json j;
    j["mode"] = mode_name(cfg.mode);
    j["network"] = cfg.network.filename().string();
    j["scenario"] = cfg.scenario.filename().string();
    j["horizon_h"] = scenario.horizon_h;
    j["dt_h"] = scenario.dt_h;
    j["segment_length_m"] = scenario.segment_length_m;
    j["xi"] = scenario.xi;
    j["kkt_tol"] = solver.kkt_tol;
    j["variables"] = out.variables;
    j["equalities"] = out.equalities;
    j["inequalities"] = out.inequalities;
    return j;
  }

  void execute() {
    cfg.validate();
    out.out_dir = cfg.out_dir.empty() ? default_output_dir() : cfg.out_dir;

    Network net = load_network(cfg.network);
    scenario = load_scenario(cfg.scenario);
    if (cfg.dt_h) scenario.dt_h = *cfg.dt_h;
    if (cfg.dl_m) scenario.segment_length_m = *cfg.dl_m;
    if (cfg.xi) scenario.xi = *cfg.xi;
    if (cfg.tol) solver.kkt_tol = *cfg.tol;
    solver.validate();

    const auto diagnostics = validate_topology(net);
    if (!diagnostics.empty()) {
      std::string text;
      for (const Diagnostic& d : diagnostics) text += "\n  " + d.code + ": " + d.message;
      throw ParseError(cfg.network.string(), "invalid network:" + text);
    }
    segnet = segment_pipes(net, scenario.segment_length_m);
    const TimeGrid grid = build_time_grid(scenario.horizon_h, scenario.dt_h);
    const Scenario frozen = scenario.frozen_at_start();
    const TimeGrid steady_grid = build_time_grid(frozen.horizon_h, frozen.dt_h);

    std::error_code ec;
    std::filesystem::create_directories(out.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out.out_dir.string() + ": " + ec.message());

    log << "network: " << net.nodes.size() << " nodes, " << net.pipes.size() << " pipes, "
        << net.compressors.size() << " compressors; " << segnet.net.pipes.size()
        << " segments after splitting at " << scenario.segment_length_m << " m\n";

    if (cfg.mode == RunMode::validate_only) {
      const NlpProblem problem = assemble_nlp(segnet, scenario, grid);
      record_counts(problem);
      add_derivative_checks(problem, "transient");
      if (cfg.export_nlp) export_nlp_csv(problem, out.out_dir);
      write_common(base_summary());
      finish_audit();
      return;
    }

    const NlpProblem steady_problem = assemble_nlp(segnet, frozen, steady_grid);
    if (cfg.mode == RunMode::steady) record_counts(steady_problem);
    out.steady = solve_steady(steady_problem, solver);
    log_stage(log, "steady", *out.steady);
    if (out.steady->status != SolveStatus::local_optimum) {
      fail_solve(*out.steady, "steady", steady_problem);
      return;
    }

    if (cfg.mode == RunMode::steady) {
      out.trajectory = extract_trajectory(steady_problem, out.steady->x);
      finish_solution(steady_problem, frozen, "steady");
      return;
    }

    const NlpProblem problem = assemble_nlp(segnet, scenario, grid);
    record_counts(problem);
    out.transient = solve_transient(problem, *out.steady, solver);
    log_stage(log, "transient", *out.transient);
    if (out.transient->status != SolveStatus::local_optimum) {
      fail_solve(*out.transient, "transient", problem);
      return;
    }
    out.trajectory = extract_trajectory(problem, out.transient->x);
    finish_solution(problem, scenario, "transient");
  }

  void record_counts(const NlpProblem& problem) {
    out.variables = problem.nlp.num_variables();
    out.equalities = problem.equalities;
    out.inequalities = problem.inequalities;
    log << "NLP: " << out.variables << " variables, " << out.equalities << " equalities, "
        << out.inequalities << " inequalities\n";
  }

  void write_iterations() {
    if (!cfg.iteration_log) return;
    std::vector<std::pair<std::string, const SolveResult*>> stages;
    if (out.steady) stages.emplace_back("steady", &*out.steady);
    if (out.transient) stages.emplace_back("transient", &*out.transient);
    write_iteration_log(out.out_dir / "iterations.csv", stages);
  }

  nlohmann::ordered_json solve_summary() const {
    nlohmann::ordered_json j = base_summary();
    if (out.steady) j["steady"] = stage_json(*out.steady);
    if (out.transient) j["transient"] = stage_json(*out.transient);
    if (out.trajectory) {
      j["objective_usd"] = {{"R_e", out.trajectory->objective.economic},
                            {"R_c", out.trajectory->objective.compression},
                            {"total", out.trajectory->objective.total}};
    }
    j["audit_pass"] = out.audit.pass();
    return j;
  }

  void fail_solve(const SolveResult& r, const char* stage, const NlpProblem& problem) {
    out.exit_code = exit_for(r.status);
    out.message = std::string(stage) + " solve ended with status " + status_name(r.status) +
                  ": " + r.message;
    if (cfg.export_nlp) export_nlp_csv(problem, out.out_dir);
    write_iterations();
    write_text(out.out_dir / "summary.json", solve_summary().dump(2) + "\n");
  }

  void finish_solution(const NlpProblem& problem, const Scenario& used, const char* stage) {
    AuditOptions opt;
    opt.feasibility_tol = 10.0 * solver.kkt_tol;
    out.audit = audit_solution(*out.trajectory, segnet, used, opt);
    add_derivative_checks(problem, stage);
    write_solution(*out.trajectory, out.out_dir);
    write_iterations();
    if (cfg.export_nlp) export_nlp_csv(problem, out.out_dir);
    write_common(solve_summary());
    finish_audit();
  }

  void finish_audit() {
    for (const std::string& w : out.audit.warnings) log << "warning: " << w << "\n";
    if (out.audit.pass()) {
      out.exit_code = kExitOk;
      out.message = "ok";
    } else {
      out.exit_code = kExitAuditFailure;
      out.message = "audit failed:";
      for (const AuditCheck& c : out.audit.checks) {
        if (!c.pass) out.message += " " + c.name;
      }
    }
  }
};

}  // namespace

RunOutcome run(const RunConfig& config, std::ostream& log) {
  Pipeline p{config, log, {}, {}, {}, {}};
  try {
    p.execute();
  } catch (const ParseError& e) {
    p.out.exit_code = kExitParseError;
    p.out.message = e.what();
  } catch (const ConfigError& e) {
    p.out.exit_code = kExitParseError;
    p.out.message = e.what();
  } catch (const AssemblyError& e) {
    p.out.exit_code = kExitParseError;
    p.out.message = std::string("cannot assemble the problem: ") + e.what();
  } catch (const DomainError& e) {
    p.out.exit_code = kExitParseError;
    p.out.message = e.what();
  } catch (const std::exception& e) {
    p.out.exit_code = kExitSolverError;
    p.out.message = e.what();
  }
  return std::move(p.out);
}

}  // namespace h2blend
