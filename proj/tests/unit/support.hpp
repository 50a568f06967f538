#pragma once

// Shared fixtures: the bundled cases and a few small builders.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "h2blend/network.hpp"
#include "h2blend/solver.hpp"
#include "h2blend/transcription.hpp"

namespace h2test {

inline std::filesystem::path data_dir() { return H2BLEND_DATA_DIR; }

struct Case {
  h2blend::Network net;
  h2blend::Scenario scenario;
};

inline Case load_case(const std::string& name) {
  const auto dir = data_dir() / name;
  return {h2blend::load_network(dir / "network.json"), h2blend::load_scenario(dir / "scenario.json")};
}

inline h2blend::NlpProblem assemble(const Case& c, bool steady = false,
                                    const h2blend::AssemblyOptions& opt = {}) {
  const auto segnet = h2blend::segment_pipes(c.net, c.scenario.segment_length_m);
  if (steady) {
    const auto frozen = c.scenario.frozen_at_start();
    return h2blend::assemble_nlp(segnet, frozen,
                                 h2blend::build_time_grid(frozen.horizon_h, frozen.dt_h), opt);
  }
  return h2blend::assemble_nlp(segnet, c.scenario,
                               h2blend::build_time_grid(c.scenario.horizon_h, c.scenario.dt_h), opt);
}

struct Solved {
  h2blend::NlpProblem steady_problem;
  h2blend::NlpProblem problem;
  h2blend::SolveResult steady;
  h2blend::SolveResult transient;
};

inline Solved solve_case(const Case& c, const h2blend::SolverOptions& opt = {}) {
  Solved s{assemble(c, true), assemble(c), {}, {}};
  s.steady = h2blend::solve_steady(s.steady_problem, opt);
  s.transient = h2blend::solve_transient(s.problem, s.steady, opt);
  return s;
}

inline double rel(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

}  // namespace h2test
