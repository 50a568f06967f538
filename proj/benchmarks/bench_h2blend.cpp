// Microbenchmarks: assembly, derivative evaluation, KKT factorization and
// end-to-end solves on the bundled cases.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "h2blend/solver.hpp"
#include "h2blend/sparse_ldl.hpp"
#include "h2blend/transcription.hpp"
#include "h2blend/validation.hpp"

using namespace h2blend;

namespace {

const char* const kCases[] = {"single_pipe", "eight_node"};

struct Inputs {
  SegmentedNetwork segnet;
  Scenario scenario;
  TimeGrid grid;
};

Inputs load(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(H2BLEND_DATA_DIR) / name;
  Inputs in;
  in.scenario = load_scenario(dir / "scenario.json");
  in.segnet = segment_pipes(load_network(dir / "network.json"), in.scenario.segment_length_m);
  in.grid = build_time_grid(in.scenario.horizon_h, in.scenario.dt_h);
  return in;
}

NlpProblem problem(const std::string& name) {
  const Inputs in = load(name);
  return assemble_nlp(in.segnet, in.scenario, in.grid);
}

// Lower triangle of [H + I, J^T; J, -1e-8 I] in CSC form, as the interior
// point method builds it.
struct Kkt {
  int n = 0;
  std::vector<int> col_ptr;
  std::vector<int> row_idx;
  std::vector<double> values;
};

Kkt build_kkt(const NlpProblem& p, const std::vector<double>& x) {
  const NlpInterface& nlp = p.nlp;
  const int nv = nlp.num_variables();
  const int m = nlp.num_rows();
  std::map<std::pair<int, int>, double> entries;  // (col, row) keeps CSC order

  std::vector<double> lambda(static_cast<std::size_t>(m), 0.5);
  const SparsePattern& hp = nlp.hessian_pattern();
  std::vector<double> hv(hp.nnz());
  nlp.hessian_values(x, 1.0, lambda, hv);
  for (int r = 0; r < hp.rows; ++r) {
    for (int k = hp.row_ptr[r]; k < hp.row_ptr[r + 1]; ++k) entries[{hp.col[k], r}] += hv[k];
  }
  for (int v = 0; v < nv; ++v) entries[{v, v}] += 1.0;

  const SparsePattern& jp = nlp.jacobian_pattern();
  std::vector<double> jv(jp.nnz());
  nlp.jacobian_values(x, jv);
  for (int r = 0; r < jp.rows; ++r) {
    for (int k = jp.row_ptr[r]; k < jp.row_ptr[r + 1]; ++k) entries[{jp.col[k], nv + r}] += jv[k];
    entries[{nv + r, nv + r}] = -1e-8;
  }

  Kkt kkt;
  kkt.n = nv + m;
  kkt.col_ptr.assign(static_cast<std::size_t>(kkt.n) + 1, 0);
  for (const auto& [key, value] : entries) {
    ++kkt.col_ptr[static_cast<std::size_t>(key.first) + 1];
    kkt.row_idx.push_back(key.second);
    kkt.values.push_back(value);
  }
  for (int c = 0; c < kkt.n; ++c) kkt.col_ptr[c + 1] += kkt.col_ptr[c];
  return kkt;
}

void BM_Assemble(benchmark::State& state) {
  const Inputs in = load(kCases[state.range(0)]);
  for (auto _ : state) {
    NlpProblem p = assemble_nlp(in.segnet, in.scenario, in.grid);
    benchmark::DoNotOptimize(p.nlp.num_variables());
  }
  state.SetLabel(kCases[state.range(0)]);
}
BENCHMARK(BM_Assemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Rows(benchmark::State& state) {
  const NlpProblem p = problem(kCases[state.range(0)]);
  const auto x = random_interior_point(p, 1);
  std::vector<double> g(static_cast<std::size_t>(p.nlp.num_rows()));
  for (auto _ : state) {
    p.nlp.rows(x, g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetLabel(kCases[state.range(0)]);
}
BENCHMARK(BM_Rows)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Jacobian(benchmark::State& state) {
  const NlpProblem p = problem(kCases[state.range(0)]);
  const auto x = random_interior_point(p, 1);
  std::vector<double> v(p.nlp.jacobian_pattern().nnz());
  for (auto _ : state) {
    p.nlp.jacobian_values(x, v);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetLabel(kCases[state.range(0)]);
  state.counters["nnz"] = static_cast<double>(v.size());
}
BENCHMARK(BM_Jacobian)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Hessian(benchmark::State& state) {
  const NlpProblem p = problem(kCases[state.range(0)]);
  const auto x = random_interior_point(p, 1);
  const std::vector<double> lambda(static_cast<std::size_t>(p.nlp.num_rows()), 0.5);
  std::vector<double> v(p.nlp.hessian_pattern().nnz());
  for (auto _ : state) {
    p.nlp.hessian_values(x, 1.0, lambda, v);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetLabel(kCases[state.range(0)]);
  state.counters["nnz"] = static_cast<double>(v.size());
}
BENCHMARK(BM_Hessian)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_KktAnalyze(benchmark::State& state) {
  const NlpProblem p = problem(kCases[state.range(0)]);
  const Kkt kkt = build_kkt(p, random_interior_point(p, 1));
  for (auto _ : state) {
    SparseLdl ldl;
    ldl.analyze(kkt.n, kkt.col_ptr, kkt.row_idx);
    benchmark::DoNotOptimize(ldl.dimension());
  }
  state.SetLabel(kCases[state.range(0)]);
}
BENCHMARK(BM_KktAnalyze)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KktFactorSolve(benchmark::State& state) {
  const NlpProblem p = problem(kCases[state.range(0)]);
  const Kkt kkt = build_kkt(p, random_interior_point(p, 1));
  SparseLdl ldl;
  ldl.analyze(kkt.n, kkt.col_ptr, kkt.row_idx);
  std::vector<double> rhs(static_cast<std::size_t>(kkt.n));
  for (auto _ : state) {
    if (!ldl.factor(kkt.values)) state.SkipWithError("singular KKT matrix");
    std::fill(rhs.begin(), rhs.end(), 1.0);
    ldl.solve(rhs);
    benchmark::DoNotOptimize(rhs.data());
  }
  state.SetLabel(kCases[state.range(0)]);
  state.counters["dim"] = kkt.n;
  state.counters["factor_nnz"] = static_cast<double>(ldl.factor_nonzeros());
}
BENCHMARK(BM_KktFactorSolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SolveCase(benchmark::State& state) {
  const Inputs in = load(kCases[state.range(0)]);
  const Scenario frozen = in.scenario.frozen_at_start();
  const NlpProblem steady =
      assemble_nlp(in.segnet, frozen, build_time_grid(frozen.horizon_h, frozen.dt_h));
  const NlpProblem p = assemble_nlp(in.segnet, in.scenario, in.grid);
  const SolverOptions opt;
  int iterations = 0;
  for (auto _ : state) {
    const SolveResult s = solve_steady(steady, opt);
    const SolveResult t = solve_transient(p, s, opt);
    if (t.status != SolveStatus::local_optimum) state.SkipWithError("solve failed");
    iterations = t.iterations;
  }
  state.SetLabel(kCases[state.range(0)]);
  state.counters["transient_iter"] = iterations;
}
BENCHMARK(BM_SolveCase)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
