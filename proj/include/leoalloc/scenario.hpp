#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "leoalloc/allocator.hpp"
#include "leoalloc/geodata.hpp"
#include "leoalloc/linkbudget.hpp"
#include "leoalloc/orbital.hpp"
#include "leoalloc/solver.hpp"

namespace leo {

enum class Algorithm { kGlobal, kDistributed };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

struct PopulationSource {
  std::optional<std::filesystem::path> raster_path;  // takes precedence when set
  PopulationModel synthetic;
};

/// Everything needed to run one episode. The JSON form carries units in key
/// names and dB quantities in dB; see configs/europe.json.
struct ScenarioConfig {
  GridSpec grid;
  PopulationSource population;
  double alpha = 1e-3;
  ConstellationConfig constellation;
  LinkConfig::Db link;
  TimingConfig timing;
  double handover_cost = 0.0;
  Algorithm algorithm = Algorithm::kGlobal;
  SolverConfig solver;
  MatchingConfig matching;
  AdjustRule adjust_rule = AdjustRule::kPenalizedRate;
  double elevation_mask_deg = 30.0;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;  // empty: no artifacts
  int threads = 1;
  bool record_timing = true;   // false writes solver_s = 0 so reruns are byte-identical
  bool write_allocations = true;
  bool write_ephemeris = false;    // ephemeris.csv: positions at every slot start
  bool write_rate_tables = false;  // rates/slot_####.csv

  LinkConfig link_config() const { return LinkConfig::from_db(link); }
  HandoverModel handover_model() const { return {handover_cost}; }
  void validate() const;
  /// Hex FNV-1a hash over the configuration, excluding output location,
  /// thread count and artifact switches.
  std::string fingerprint() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
/// Reads a JSON scenario. Relative raster paths resolve against the config's
/// directory. Throws ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// The 40-55 N / 5-30 E, 1584-satellite scenario with a synthetic
/// log-normal population.
ScenarioConfig europe_scenario();

}  // namespace leo
