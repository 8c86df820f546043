#include "leoalloc/scenario.hpp"

#include <cstdio>
#include <fstream>

#include "leoalloc/errors.hpp"

namespace leo {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  const json& s = j.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return s;
}

std::string model_name(PopulationModelKind k) {
  switch (k) {
    case PopulationModelKind::kUniform:
      return "uniform";
    case PopulationModelKind::kLogNormal:
      return "lognormal";
    case PopulationModelKind::kClustered:
      return "clustered";
  }
  return "lognormal";
}

std::string weight_name(MatchingWeight w) {
  switch (w) {
    case MatchingWeight::kPenalizedRate:
      return "penalized_rate";
    case MatchingWeight::kRawRate:
      return "raw_rate";
    case MatchingWeight::kRatePerUser:
      return "rate_per_user";
  }
  return "penalized_rate";
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "global") return Algorithm::kGlobal;
  if (name == "distributed") return Algorithm::kDistributed;
  throw ConfigError("unknown algorithm '" + name + "' (expected global or distributed)");
}

std::string to_string(Algorithm a) { return a == Algorithm::kGlobal ? "global" : "distributed"; }

void ScenarioConfig::validate() const {
  grid.validate();
  constellation.validate();
  link_config().validate();
  timing.validate();
  handover_model().validate();
  solver.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(elevation_mask_deg >= -90.0 && elevation_mask_deg <= 90.0))
    throw ConfigError("elevation mask must lie in [-90, 90] degrees");
}

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  ScenarioConfig c;
  try {
    const auto& g = section(j, "grid");
    c.grid.lat_min = get_or(g, "lat_min_deg", c.grid.lat_min);
    c.grid.lat_max = get_or(g, "lat_max_deg", c.grid.lat_max);
    c.grid.lon_min = get_or(g, "lon_min_deg", c.grid.lon_min);
    c.grid.lon_max = get_or(g, "lon_max_deg", c.grid.lon_max);
    c.grid.resolution = get_or(g, "resolution_deg", c.grid.resolution);

    const auto& p = section(j, "population");
    if (p.contains("raster_path") && !p.at("raster_path").is_null())
      c.population.raster_path = p.at("raster_path").get<std::string>();
    const auto& s = section(p, "synthetic");
    auto& m = c.population.synthetic;
    m.kind = parse_population_model(get_or<std::string>(s, "model", model_name(m.kind)));
    m.uniform_count = get_or(s, "count", m.uniform_count);
    m.mu = get_or(s, "mu", m.mu);
    m.sigma = get_or(s, "sigma", m.sigma);
    m.correlation_cells = get_or(s, "correlation_cells", m.correlation_cells);
    m.zero_fraction = get_or(s, "zero_fraction", m.zero_fraction);
    m.hotspots = get_or(s, "hotspots", m.hotspots);
    m.peak_population = get_or(s, "peak_population", m.peak_population);
    m.hotspot_radius_cells = get_or(s, "hotspot_radius_cells", m.hotspot_radius_cells);
    m.min_separation_cells = get_or(s, "min_separation_cells", m.min_separation_cells);
    c.alpha = get_or(j, "alpha", c.alpha);

    const auto& k = section(j, "constellation");
    c.constellation.total_satellites = get_or(k, "total_satellites", c.constellation.total_satellites);
    c.constellation.orbital_planes = get_or(k, "orbital_planes", c.constellation.orbital_planes);
    c.constellation.altitude_m = 1e3 * get_or(k, "altitude_km", c.constellation.altitude_m / 1e3);
    c.constellation.inclination_deg = get_or(k, "inclination_deg", c.constellation.inclination_deg);
    c.constellation.inter_plane_phasing_deg =
        get_or(k, "inter_plane_phasing_deg", c.constellation.inter_plane_phasing_deg);
    c.constellation.earth_radius_m = 1e3 * get_or(k, "earth_radius_km", c.constellation.earth_radius_m / 1e3);
    c.constellation.gravitational_parameter =
        get_or(k, "gravitational_parameter_m3_s2", c.constellation.gravitational_parameter);
    c.constellation.earth_rotation_rate =
        get_or(k, "earth_rotation_rate_rad_s", c.constellation.earth_rotation_rate);

    const auto& l = section(j, "link");
    c.link.carrier_frequency_hz = 1e9 * get_or(l, "carrier_frequency_ghz", c.link.carrier_frequency_hz / 1e9);
    c.link.tx_power_w = get_or(l, "tx_power_w", c.link.tx_power_w);
    c.link.sat_antenna_gain_dbi = get_or(l, "sat_antenna_gain_dbi", c.link.sat_antenna_gain_dbi);
    c.link.user_antenna_gain_dbi = get_or(l, "user_antenna_gain_dbi", c.link.user_antenna_gain_dbi);
    c.link.atmospheric_loss_db = get_or(l, "atmospheric_loss_db", c.link.atmospheric_loss_db);
    c.link.pointing_loss_db = get_or(l, "pointing_loss_db", c.link.pointing_loss_db);
    c.link.bandwidth_hz = 1e6 * get_or(l, "bandwidth_mhz", c.link.bandwidth_hz / 1e6);
    c.link.noise_power_dbw = get_or(l, "noise_power_dbw", c.link.noise_power_dbw);

    const auto& t = section(j, "timing");
    c.timing.slot_duration_s = get_or(t, "slot_duration_s", c.timing.slot_duration_s);
    c.timing.frame_duration_s = 1e-3 * get_or(t, "frame_duration_ms", c.timing.frame_duration_s * 1e3);
    c.timing.beams_per_satellite = get_or(t, "beams_per_satellite", c.timing.beams_per_satellite);
    c.timing.num_slots = get_or(t, "num_slots", c.timing.num_slots);
    c.timing.epoch_s = get_or(t, "epoch_s", c.timing.epoch_s);

    c.handover_cost = get_or(j, "handover_cost", c.handover_cost);
    c.algorithm = parse_algorithm(get_or<std::string>(j, "algorithm", to_string(c.algorithm)));

    const auto& v = section(j, "solver");
    if (v.contains("beta") && !v.at("beta").is_null()) c.solver.beta = v.at("beta").get<double>();
    c.solver.tau = get_or(v, "tau_frames", c.solver.tau);
    c.solver.n_iter = get_or(v, "n_iter", c.solver.n_iter);
    c.solver.pg_max_steps = get_or(v, "pg_max_steps", c.solver.pg_max_steps);
    if (v.contains("pg_tolerance") && !v.at("pg_tolerance").is_null())
      c.solver.pg_tolerance = v.at("pg_tolerance").get<double>();
    c.solver.pg_step_rule = parse_step_rule(get_or<std::string>(v, "pg_step_rule", "backtracking"));
    c.solver.fixed_step = get_or(v, "fixed_step", c.solver.fixed_step);

    c.matching.weight_rule =
        parse_matching_weight(get_or<std::string>(section(j, "matching"), "weight_rule", "penalized_rate"));
    c.adjust_rule = parse_adjust_rule(get_or<std::string>(j, "adjust_rule", "penalized_rate"));
    c.elevation_mask_deg = get_or(j, "elevation_mask_deg", c.elevation_mask_deg);
    c.seed = get_or(j, "seed", c.seed);
    if (j.contains("output_dir") && !j.at("output_dir").is_null())
      c.output_dir = j.at("output_dir").get<std::string>();
    c.threads = get_or(j, "threads", c.threads);
    c.record_timing = get_or(j, "record_timing", c.record_timing);
    c.write_allocations = get_or(j, "write_allocations", c.write_allocations);
    c.write_ephemeris = get_or(j, "write_ephemeris", c.write_ephemeris);
    c.write_rate_tables = get_or(j, "write_rate_tables", c.write_rate_tables);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["grid"] = {{"lat_min_deg", c.grid.lat_min},
               {"lat_max_deg", c.grid.lat_max},
               {"lon_min_deg", c.grid.lon_min},
               {"lon_max_deg", c.grid.lon_max},
               {"resolution_deg", c.grid.resolution}};
  const auto& m = c.population.synthetic;
  j["population"] = {{"raster_path", c.population.raster_path ? json(c.population.raster_path->string()) : json()},
                     {"synthetic",
                      {{"model", model_name(m.kind)},
                       {"count", m.uniform_count},
                       {"mu", m.mu},
                       {"sigma", m.sigma},
                       {"correlation_cells", m.correlation_cells},
                       {"zero_fraction", m.zero_fraction},
                       {"hotspots", m.hotspots},
                       {"peak_population", m.peak_population},
                       {"hotspot_radius_cells", m.hotspot_radius_cells},
                       {"min_separation_cells", m.min_separation_cells}}}};
  j["alpha"] = c.alpha;
  j["constellation"] = {{"total_satellites", c.constellation.total_satellites},
                        {"orbital_planes", c.constellation.orbital_planes},
                        {"altitude_km", c.constellation.altitude_m / 1e3},
                        {"inclination_deg", c.constellation.inclination_deg},
                        {"inter_plane_phasing_deg", c.constellation.inter_plane_phasing_deg},
                        {"earth_radius_km", c.constellation.earth_radius_m / 1e3},
                        {"gravitational_parameter_m3_s2", c.constellation.gravitational_parameter},
                        {"earth_rotation_rate_rad_s", c.constellation.earth_rotation_rate}};
  j["link"] = {{"carrier_frequency_ghz", c.link.carrier_frequency_hz / 1e9},
               {"tx_power_w", c.link.tx_power_w},
               {"sat_antenna_gain_dbi", c.link.sat_antenna_gain_dbi},
               {"user_antenna_gain_dbi", c.link.user_antenna_gain_dbi},
               {"atmospheric_loss_db", c.link.atmospheric_loss_db},
               {"pointing_loss_db", c.link.pointing_loss_db},
               {"bandwidth_mhz", c.link.bandwidth_hz / 1e6},
               {"noise_power_dbw", c.link.noise_power_dbw}};
  j["timing"] = {{"slot_duration_s", c.timing.slot_duration_s},
                 {"frame_duration_ms", c.timing.frame_duration_s * 1e3},
                 {"beams_per_satellite", c.timing.beams_per_satellite},
                 {"num_slots", c.timing.num_slots},
                 {"epoch_s", c.timing.epoch_s}};
  j["handover_cost"] = c.handover_cost;
  j["algorithm"] = to_string(c.algorithm);
  j["solver"] = {{"beta", c.solver.beta ? json(*c.solver.beta) : json()},
                 {"tau_frames", c.solver.tau},
                 {"n_iter", c.solver.n_iter},
                 {"pg_max_steps", c.solver.pg_max_steps},
                 {"pg_tolerance", c.solver.pg_tolerance ? json(*c.solver.pg_tolerance) : json()},
                 {"pg_step_rule", c.solver.pg_step_rule == StepRule::kFixed ? "fixed" : "backtracking"},
                 {"fixed_step", c.solver.fixed_step}};
  j["matching"] = {{"weight_rule", weight_name(c.matching.weight_rule)}};
  j["adjust_rule"] = c.adjust_rule == AdjustRule::kLiteral ? "literal" : "penalized_rate";
  j["elevation_mask_deg"] = c.elevation_mask_deg;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["threads"] = c.threads;
  j["record_timing"] = c.record_timing;
  j["write_allocations"] = c.write_allocations;
  j["write_ephemeris"] = c.write_ephemeris;
  j["write_rate_tables"] = c.write_rate_tables;
  return j;
}

std::string ScenarioConfig::fingerprint() const {
  json j = scenario_to_json(*this);
  j.erase("output_dir");
  j.erase("threads");
  j.erase("record_timing");
  j.erase("write_allocations");
  j.erase("write_ephemeris");
  j.erase("write_rate_tables");
  const std::string text = j.dump();  // object keys are sorted
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  auto cfg = scenario_from_json(j);
  if (cfg.population.raster_path && cfg.population.raster_path->is_relative())
    cfg.population.raster_path = path.parent_path() / *cfg.population.raster_path;
  return cfg;
}

ScenarioConfig europe_scenario() {
  ScenarioConfig c;
  c.population.synthetic.kind = PopulationModelKind::kLogNormal;
  c.population.synthetic.zero_fraction = 766.0 / 6161.0;
  return c;
}

}  // namespace leo
