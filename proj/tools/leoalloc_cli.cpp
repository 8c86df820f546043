// Command-line front end: simulate, sweep, inspect-slot.
//
// Failures print one JSON line {"error": kind, "message": ...} on stderr and
// exit with 2 (configuration), 3 (input data) or 4 (domain/numeric).

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "leoalloc/errors.hpp"
#include "leoalloc/simrunner.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw leo::ConfigError("bad sweep value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw leo::ConfigError("sweep: no values");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair, handover-aware LEO downlink allocation simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string algorithm;
  std::optional<double> h_cost;
  std::optional<int> n_iter;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_timing = false;
  bool solver_log = false;
  bool ephemeris = false;
  bool rate_tables = false;

  auto* sim = app.add_subcommand("simulate", "run one episode");
  sim->add_option("--config", config, "scenario JSON")->required();
  sim->add_option("--algorithm", algorithm, "global or distributed");
  sim->add_option("--h-cost", h_cost, "handover cost in [0, 1)");
  sim->add_option("--n-iter", n_iter, "reweighting iterations");
  sim->add_option("--out", out, "artifact directory");
  sim->add_option("--seed", seed, "population seed");
  sim->add_option("--threads", threads, "worker threads for geometry");
  sim->add_flag("--no-timing", no_timing, "write solver_s = 0 for reproducible reports");
  sim->add_flag("--solver-log", solver_log, "write per-iteration solver logs");
  sim->add_flag("--ephemeris", ephemeris, "write satellite positions per slot");
  sim->add_flag("--rate-tables", rate_tables, "write per-slot rate tables");

  std::string param = "h_cost";
  std::string values;
  auto* sw = app.add_subcommand("sweep", "run one episode per parameter value");
  sw->add_option("--config", config, "scenario JSON")->required();
  sw->add_option("--param", param, "h_cost or n_iter");
  sw->add_option("--values", values, "comma-separated values")->required();
  sw->add_option("--algorithm", algorithm, "global or distributed");
  sw->add_option("--out", out, "artifact directory");
  sw->add_option("--seed", seed, "population seed");
  sw->add_option("--threads", threads, "worker threads for geometry");
  sw->add_flag("--no-timing", no_timing, "write solver_s = 0 for reproducible reports");

  int slot = 0;
  auto* insp = app.add_subcommand("inspect-slot", "print visible set and rate-table statistics");
  insp->add_option("--config", config, "scenario JSON")->required();
  insp->add_option("--slot", slot, "slot index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 1);
  }

  try {
    auto cfg = leo::load_scenario(config);
    if (!algorithm.empty()) cfg.algorithm = leo::parse_algorithm(algorithm);
    if (h_cost) cfg.handover_cost = *h_cost;
    if (n_iter) cfg.solver.n_iter = *n_iter;
    if (!out.empty()) cfg.output_dir = out;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (no_timing) cfg.record_timing = false;
    if (solver_log) cfg.solver.record_iterations = true;
    if (ephemeris) cfg.write_ephemeris = true;
    if (rate_tables) cfg.write_rate_tables = true;
    cfg.validate();

    if (sim->parsed()) {
      const auto report = leo::run_episode(cfg);
      std::cout << leo::summary_json(report, cfg).dump(2) << '\n';
    } else if (sw->parsed()) {
      const auto p = leo::parse_sweep_param(param);
      const auto rows = leo::sweep(cfg, p, parse_values(values));
      leo::write_sweep_csv(std::cout, p, rows);
    } else {
      std::cout << leo::inspect_slot(cfg, slot).dump(2) << '\n';
    }
  } catch (const leo::ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const leo::IngestionError& e) {
    return fail("ingestion", e.what(), 3);
  } catch (const leo::DomainError& e) {
    return fail("domain", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 5);
  }
  return 0;
}
