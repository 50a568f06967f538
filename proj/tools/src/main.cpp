// h2blend: transient optimization of H2/NG blending in a pipeline network.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "h2blend/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Optimal transient operation of a hydrogen/natural-gas pipeline network"};
  h2blend::RunConfig cfg;
  std::string mode = "transient";
  std::string network;
  std::string scenario;
  std::string out;
  double dt = 0.0;
  double dl = 0.0;
  double xi = 0.0;
  double tol = 0.0;

  app.add_option("--network", network, "network JSON file")->required();
  app.add_option("--scenario", scenario, "scenario JSON file")->required();
  app.add_option("--out", out, "output directory (default $H2BLEND_OUT_DIR or ./out)");
  auto* dt_opt = app.add_option("--dt", dt, "time step in hours (overrides the scenario)");
  auto* dl_opt = app.add_option("--dl", dl, "maximum pipe segment length in m");
  auto* xi_opt = app.add_option("--xi", xi, "objective weight of the economic term in [0, 1]");
  auto* tol_opt = app.add_option("--tol", tol, "KKT tolerance");
  app.add_option("--mode", mode, "steady, transient or validate-only")
      ->check(CLI::IsMember({"steady", "transient", "validate-only"}));
  app.add_flag("--iter-log", cfg.iteration_log, "write iterations.csv");
  app.add_flag("--export-nlp", cfg.export_nlp, "write the assembled NLP as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return h2blend::kExitParseError;
  }

  cfg.network = network;
  cfg.scenario = scenario;
  cfg.out_dir = out;
  if (*dt_opt) cfg.dt_h = dt;
  if (*dl_opt) cfg.dl_m = dl;
  if (*xi_opt) cfg.xi = xi;
  if (*tol_opt) cfg.tol = tol;
  cfg.mode = h2blend::parse_mode(mode);

  const h2blend::RunOutcome r = h2blend::run(cfg, std::cout);
  if (r.exit_code == h2blend::kExitOk) {
    std::cout << "outputs written to " << r.out_dir.string() << "\n";
  } else {
    std::cerr << "h2blend: " << r.message << "\n";
  }
  return r.exit_code;
}
