#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "h2blend/errors.hpp"
#include "h2blend/trajectory.hpp"
#include "h2blend/validation.hpp"
#include "support.hpp"

using namespace h2blend;
using doctest::Approx;

namespace {

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!same(a[k], b[k])) return false;
  }
  return true;
}

std::size_t data_rows(const std::filesystem::path& f) {
  std::ifstream in(f);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++n;
  return n;
}

std::string first_line(const std::filesystem::path& f) {
  std::ifstream in(f);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("trajectory variables invert extraction exactly") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const NlpProblem p = h2test::assemble(h2test::load_case(name));
    const auto x = random_interior_point(p, 12);
    const SolutionTrajectory tr = extract_trajectory(p, x);
    const auto back = trajectory_variables(p, tr);
    REQUIRE(back.size() == x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      REQUIRE(back[k] == Approx(x[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("extracted series carry physical units") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"));
  const auto x = random_interior_point(p, 13);
  const SolutionTrajectory tr = extract_trajectory(p, x);
  CHECK(tr.steps() == 48);
  CHECK(tr.dt_h == 0.5);
  CHECK(tr.time_h[3] == 1.5);
  CHECK(tr.nodes.size() == 5);
  CHECK(tr.edges.size() == 4);
  CHECK(tr.edges.back().type == EdgeType::compressor);
  const int t = 7;
  CHECK(tr.node("2").rho_h2[t] == Approx(x[p.index.rho_h2(1, t)] * p.scales.rho0).epsilon(1e-15));
  CHECK(tr.edge("P1/1").f0[t] == Approx(x[p.index.f0(0, t)] * p.flow_scale).epsilon(1e-15));
  CHECK(std::isnan(tr.edge("P1/1").alpha[t]));
  CHECK(tr.edge("C1").f0[t] == tr.edge("C1").fl[t]);
  CHECK(tr.edge("C1").gamma_l[t] == tr.node("1").eta[t]);
  CHECK(tr.transfer("3").g_e[t] == Approx(x[p.index.ge(2, t)] * p.energy_scale).epsilon(1e-15));
  CHECK(tr.transfers.size() == 2);  // only supply and withdrawal nodes
  CHECK(tr.transfer("1").q_w[t] == 0.0);
  CHECK_THROWS(tr.transfer("2"));
  CHECK(tr.transfer("1").eta_s[3 * 2] == Approx(0.15).epsilon(1e-14));
  CHECK_THROWS(tr.node("nope"));

  SolutionTrajectory wrong = tr;
  wrong.nodes.pop_back();
  CHECK_THROWS_AS(trajectory_variables(p, wrong), std::invalid_argument);
}

TEST_CASE("CSV files read back to identical values") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const NlpProblem p = h2test::assemble(h2test::load_case(name));
    const SolutionTrajectory tr = extract_trajectory(p, random_interior_point(p, 14));
    const auto dir = scratch("h2blend_roundtrip");
    write_solution(tr, dir);
    const SolutionTrajectory back = read_solution(dir);
    CHECK(back.dt_h == tr.dt_h);
    CHECK(back.horizon_h == tr.horizon_h);
    CHECK(back.time_h == tr.time_h);
    CHECK(back.xi == tr.xi);
    CHECK(back.objective.economic == tr.objective.economic);
    CHECK(back.objective.compression == tr.objective.compression);
    CHECK(back.objective.total == tr.objective.total);
    REQUIRE(back.nodes.size() == tr.nodes.size());
    for (std::size_t k = 0; k < tr.nodes.size(); ++k) {
      CHECK(back.nodes[k].id == tr.nodes[k].id);
      CHECK(same(back.nodes[k].rho_h2, tr.nodes[k].rho_h2));
      CHECK(same(back.nodes[k].rho_ng, tr.nodes[k].rho_ng));
      CHECK(same(back.nodes[k].eta, tr.nodes[k].eta));
      CHECK(same(back.nodes[k].p, tr.nodes[k].p));
    }
    REQUIRE(back.edges.size() == tr.edges.size());
    for (std::size_t k = 0; k < tr.edges.size(); ++k) {
      CHECK(back.edges[k].id == tr.edges[k].id);
      CHECK(back.edges[k].type == tr.edges[k].type);
      CHECK(back.edges[k].from == tr.edges[k].from);
      CHECK(same(back.edges[k].f0, tr.edges[k].f0));
      CHECK(same(back.edges[k].fl, tr.edges[k].fl));
      CHECK(same(back.edges[k].gamma_l, tr.edges[k].gamma_l));
      CHECK(same(back.edges[k].alpha, tr.edges[k].alpha));
    }
    REQUIRE(back.transfers.size() == tr.transfers.size());
    for (std::size_t k = 0; k < tr.transfers.size(); ++k) {
      CHECK(same(back.transfers[k].eta_s, tr.transfers[k].eta_s));
      CHECK(same(back.transfers[k].q_s, tr.transfers[k].q_s));
      CHECK(same(back.transfers[k].q_w, tr.transfers[k].q_w));
      CHECK(same(back.transfers[k].g_e, tr.transfers[k].g_e));
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("CSV shapes and headers") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"));
  const SolutionTrajectory tr = extract_trajectory(p, random_interior_point(p, 15));
  const auto dir = scratch("h2blend_shapes");
  write_solution(tr, dir);
  CHECK(first_line(dir / "nodes.csv") == "time_h,node,rho_H2_kg_m3,rho_NG_kg_m3,eta,p_Pa,p_MPa");
  CHECK(first_line(dir / "edges.csv") == "time_h,edge,type,from,to,f0_kg_s,fL_kg_s,gamma_L,alpha");
  CHECK(first_line(dir / "transfers.csv") == "time_h,node,eta_s,q_s_kg_s,q_w_kg_s,g_E_MJ_s");
  CHECK(first_line(dir / "objective.csv") == "R_e_usd,R_c_usd,total_usd,xi,horizon_h,dt_h");
  CHECK(data_rows(dir / "nodes.csv") == 48 * 5);
  CHECK(data_rows(dir / "edges.csv") == 48 * 4);
  CHECK(data_rows(dir / "transfers.csv") == 48 * 2);
  CHECK(data_rows(dir / "objective.csv") == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a steady trajectory has one row per entity") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"), true);
  const SolutionTrajectory tr = extract_trajectory(p, random_interior_point(p, 16));
  const auto dir = scratch("h2blend_steady_rows");
  write_solution(tr, dir);
  CHECK(data_rows(dir / "nodes.csv") == 5);
  CHECK(data_rows(dir / "edges.csv") == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed solution files are rejected") {
  const NlpProblem p = h2test::assemble(h2test::load_case("single_pipe"), true);
  const auto dir = scratch("h2blend_bad_csv");
  write_solution(extract_trajectory(p, random_interior_point(p, 17)), dir);
  {
    std::ofstream out(dir / "nodes.csv", std::ios::app);
    out << "0,1,abc,1,0,1,1\n";
  }
  CHECK_THROWS_AS(read_solution(dir), ParseError);
  {
    std::ofstream out(dir / "nodes.csv");
    out << "time,node\n";
  }
  CHECK_THROWS_AS(read_solution(dir), ParseError);
  std::filesystem::remove(dir / "nodes.csv");
  CHECK_THROWS_AS(read_solution(dir), ParseError);
  std::filesystem::remove_all(dir);
}
