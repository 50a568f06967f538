#include <doctest.h>

#include <cmath>
#include <numbers>

#include "h2blend/errors.hpp"
#include "h2blend/network.hpp"
#include "h2blend/transcription.hpp"
#include "support.hpp"

using namespace h2blend;
using doctest::Approx;

namespace {

const char* kTwoNodes = R"({
  "nodes": [
    {"id": "A", "role": "slack", "p_min": 3e6, "p_max": 6e6, "p_slack": 5e6},
    {"id": "B", "role": ["withdrawal"], "p_min": 3e6, "p_max": 6e6, "gE_max": 100}
  ],
  "pipes": [{"id": "P", "from": "A", "to": "B", "length": 25000, "diameter": 0.5, "friction": 0.01}]
})";

bool has_code(const std::vector<Diagnostic>& d, const std::string& code) {
  for (const Diagnostic& x : d) {
    if (x.code == code) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("bundled networks parse") {
  const auto single = h2test::load_case("single_pipe");
  CHECK(single.net.nodes.size() == 3);
  CHECK(single.net.pipes.size() == 1);
  CHECK(single.net.compressors.size() == 1);
  CHECK(single.net.node("1").is_slack());
  CHECK(single.net.node("3").is_withdrawal());
  CHECK(single.scenario.dt_h == 0.5);
  CHECK(validate_topology(single.net).empty());

  const auto eight = h2test::load_case("eight_node");
  CHECK(eight.net.nodes.size() == 8);
  CHECK(eight.net.compressors.size() == 3);
  CHECK(validate_topology(eight.net).empty());
}

TEST_CASE("pipe area defaults to the circle of its diameter") {
  const Network net = parse_network(kTwoNodes);
  CHECK(net.pipes[0].area == Approx(std::numbers::pi * 0.25 / 4).epsilon(1e-15));
}

TEST_CASE("a 25 km pipe at 10 km spacing becomes three equal segments") {
  const SegmentedNetwork s = segment_pipes(parse_network(kTwoNodes), 10000.0);
  REQUIRE(s.net.pipes.size() == 3);
  for (const Pipe& p : s.net.pipes) CHECK(p.length == Approx(8333.333333333334).epsilon(1e-14));
  CHECK(s.net.nodes.size() == 4);
  CHECK(s.original_node_count == 2);
  // original ids first, auxiliary ids from the parent pipe
  CHECK(s.net.nodes[0].id == "A");
  CHECK(s.net.nodes[2].id == "P#1");
  CHECK(s.net.nodes[3].id == "P#2");
  CHECK(s.net.nodes[2].auxiliary);
  CHECK(s.net.pipes[0].from == "A");
  CHECK(s.net.pipes[2].to == "B");
  CHECK(s.net.pipes[1].id == "P/2");
  CHECK(s.pipe_segments[0].size() == 3);
}

TEST_CASE("property: segmentation preserves total pipe length") {
  const auto c = h2test::load_case("eight_node");
  for (double dl : {1000.0, 3333.0, 7000.0, 10000.0, 50000.0}) {
    const SegmentedNetwork s = segment_pipes(c.net, dl);
    for (std::size_t k = 0; k < c.net.pipes.size(); ++k) {
      double sum = 0.0;
      for (std::size_t seg : s.pipe_segments[k]) {
        CHECK(s.net.pipes[seg].length <= dl * (1 + 1e-12));
        sum += s.net.pipes[seg].length;
      }
      CHECK(std::abs(sum - c.net.pipes[k].length) <= 1e-12 * c.net.pipes[k].length);
    }
  }
}

TEST_CASE("property: serialized networks parse back to the same structure") {
  for (const char* name : {"single_pipe", "eight_node"}) {
    const Network a = h2test::load_case(name).net;
    const Network b = parse_network(network_to_json(a));
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
      CHECK(a.nodes[k].id == b.nodes[k].id);
      CHECK(a.nodes[k].roles == b.nodes[k].roles);
      CHECK(a.nodes[k].p_min == b.nodes[k].p_min);
      CHECK(a.nodes[k].p_max == b.nodes[k].p_max);
      CHECK(a.nodes[k].p_slack == b.nodes[k].p_slack);
      CHECK(a.nodes[k].ge_max == b.nodes[k].ge_max);
      CHECK(a.nodes[k].q_s_max == b.nodes[k].q_s_max);
    }
    REQUIRE(a.pipes.size() == b.pipes.size());
    for (std::size_t k = 0; k < a.pipes.size(); ++k) {
      CHECK(a.pipes[k].id == b.pipes[k].id);
      CHECK(a.pipes[k].length == b.pipes[k].length);
      CHECK(a.pipes[k].diameter == b.pipes[k].diameter);
      CHECK(a.pipes[k].lambda == b.pipes[k].lambda);
      CHECK(a.pipes[k].area == b.pipes[k].area);
    }
    REQUIRE(a.compressors.size() == b.compressors.size());
    for (std::size_t k = 0; k < a.compressors.size(); ++k) {
      CHECK(a.compressors[k].from == b.compressors[k].from);
      CHECK(a.compressors[k].alpha_max == b.compressors[k].alpha_max);
      CHECK(a.compressors[k].fc_max == b.compressors[k].fc_max);
    }
  }
}

TEST_CASE("injection sinusoid peaks a quarter period in") {
  CHECK(injection_profile(0.1, 0.05, 2.0, 3.0, 24.0) == Approx(0.15).epsilon(1e-15));
  CHECK(injection_profile(0.1, 0.05, 2.0, 9.0, 24.0) == Approx(0.05).epsilon(1e-14));
  CHECK(injection_profile(0.1, 0.05, 2.0, 0.0, 24.0) == 0.1);
}

TEST_CASE("property: injection profile repeats with period T over nu") {
  for (double nu : {1.0, 2.0, 3.0}) {
    const double period = 24.0 / nu;
    for (double t = 0.0; t < 24.0; t += 0.37) {
      CHECK(std::abs(injection_profile(0.1, 0.05, nu, t, 24.0) -
                     injection_profile(0.1, 0.05, nu, t + period, 24.0)) <= 1e-15);
    }
  }
}

TEST_CASE("series profiles are piecewise constant and wrap") {
  const Profile p = SeriesProfile{{0.0, 6.0, 12.0}, {1.0, 2.0, 3.0}};
  CHECK(evaluate_profile(p, 0.0, 24.0) == 1.0);
  CHECK(evaluate_profile(p, 5.99, 24.0) == 1.0);
  CHECK(evaluate_profile(p, 6.0, 24.0) == 2.0);
  CHECK(evaluate_profile(p, 23.0, 24.0) == 3.0);
  CHECK(evaluate_profile(p, 24.5, 24.0) == 1.0);
  CHECK(profile_min(p) == 1.0);
  CHECK(profile_max(p) == 3.0);
}

TEST_CASE("scenario supply fraction defaults to natural gas") {
  const auto c = h2test::load_case("single_pipe");
  CHECK(c.scenario.supply_fraction("1", 3.0) == Approx(0.15).epsilon(1e-15));
  CHECK(c.scenario.supply_fraction("2", 3.0) == 0.0);
  const Scenario frozen = c.scenario.frozen_at_start();
  CHECK(frozen.horizon_h == frozen.dt_h);
  CHECK(frozen.supply_fraction("1", 3.0) == Approx(0.1).epsilon(1e-15));
}

TEST_CASE("withdrawal specs fall back to the node") {
  const auto c = h2test::load_case("single_pipe");
  const WithdrawalSpec w = c.scenario.withdrawal_spec(c.net.node("3"));
  CHECK(w.mode == EnergyMode::bound);
  CHECK(evaluate_profile(w.profile, 0.0, 24.0) == 8000.0);
}

TEST_CASE("topology diagnostics") {
  Network net = parse_network(kTwoNodes);
  CHECK(validate_topology(net).empty());

  Network dangling = net;
  dangling.pipes[0].to = "Z";
  CHECK(has_code(validate_topology(dangling), "dangling-edge"));

  Network no_slack = net;
  no_slack.nodes[0].roles = 0;
  no_slack.nodes[0].p_slack.reset();
  CHECK(has_code(validate_topology(no_slack), "no-slack"));

  Network island = net;
  island.nodes.push_back(island.nodes[1]);
  island.nodes.back().id = "C";
  island.reindex();
  CHECK(has_code(validate_topology(island), "unreachable-node"));
}

TEST_CASE("malformed documents name the offending item") {
  CHECK_THROWS_AS(parse_network("{"), ParseError);
  CHECK_THROWS_AS(parse_network(R"({"nodes": [{"id": "A", "p_min": 1, "p_max": 2, "role": "bogus"}]})"),
                  ParseError);
  try {
    parse_network(R"({"nodes": [{"id": "A", "p_min": -1, "p_max": 2}]})");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.where().find("p_min") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_scenario(R"({"horizon_hours": 24, "dt_hours": 5, "segment_length_m": 1})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"horizon_hours": 24, "dt_hours": 1, "segment_length_m": 1,
                                     "profiles": {"A": {"type": "sinusoid", "eta0": 0.02, "delta": 0.05, "nu": 1}}})"),
                  ParseError);
  CHECK_THROWS_AS(load_network("/nonexistent/network.json"), ParseError);
}

TEST_CASE("time grid") {
  const TimeGrid g = build_time_grid(24.0, 0.5);
  CHECK(g.steps == 48);
  CHECK(g.succ(47) == 0);
  CHECK(g.succ(3) == 4);
  CHECK(g.dt_seconds() == 1800.0);
  CHECK_THROWS_AS(build_time_grid(24.0, 5.0), ConfigError);
  // succ is a bijection
  std::vector<int> hits(48, 0);
  for (int n = 0; n < 48; ++n) ++hits[g.succ(n)];
  for (int h : hits) CHECK(h == 1);
}
