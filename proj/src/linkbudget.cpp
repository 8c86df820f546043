#include "leoalloc/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "leoalloc/errors.hpp"
#include "leoalloc/parallel.hpp"

namespace leo {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

LinkConfig LinkConfig::from_db(const Db& db) {
  LinkConfig c;
  c.carrier_frequency_hz = db.carrier_frequency_hz;
  c.tx_power_w = db.tx_power_w;
  c.sat_antenna_gain = db_to_linear(db.sat_antenna_gain_dbi);
  c.user_antenna_gain = db_to_linear(db.user_antenna_gain_dbi);
  c.atmospheric_loss = db_to_linear(db.atmospheric_loss_db);
  c.pointing_loss = db_to_linear(db.pointing_loss_db);
  c.bandwidth_hz = db.bandwidth_hz;
  c.noise_power_w = db_to_linear(db.noise_power_dbw);
  return c;
}

void LinkConfig::validate() const {
  for (double v : {carrier_frequency_hz, tx_power_w, sat_antenna_gain, user_antenna_gain,
                   atmospheric_loss, pointing_loss, bandwidth_hz, noise_power_w, speed_of_light})
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("link: every link parameter must be strictly positive and finite");
}

int TimingConfig::frames_per_slot() const {
  return static_cast<int>(std::lround(slot_duration_s / frame_duration_s));
}

void TimingConfig::validate() const {
  if (!(slot_duration_s > 0.0) || !(frame_duration_s > 0.0))
    throw ConfigError("timing: slot and frame durations must be positive");
  const double ratio = slot_duration_s / frame_duration_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw ConfigError("timing: slot duration must be an integral number of frames");
  if (frames_per_slot() < 1) throw ConfigError("timing: slot shorter than one frame");
  if (beams_per_satellite < 1) throw ConfigError("timing: at least one beam per satellite");
  if (num_slots < 1) throw ConfigError("timing: at least one slot");
}

void HandoverModel::validate() const {
  if (!(handover_cost >= 0.0 && handover_cost < 1.0))
    throw ConfigError("handover cost must lie in [0, 1)");
}

double path_loss(double distance_m, const LinkConfig& cfg) {
  const double a = 4.0 * std::numbers::pi * distance_m * cfg.carrier_frequency_hz;
  return a * a / (cfg.speed_of_light * cfg.speed_of_light) * cfg.atmospheric_loss *
         cfg.pointing_loss;
}

double nominal_rate(double distance_m, const LinkConfig& cfg) {
  const double snr = cfg.tx_power_w * cfg.user_antenna_gain * cfg.sat_antenna_gain /
                     (path_loss(distance_m, cfg) * cfg.noise_power_w);
  return cfg.bandwidth_hz * std::log2(1.0 + snr);
}

double per_user_throughput(double frames, double rho_min, double users,
                           const TimingConfig& timing) {
  if (!(users > 0.0)) throw DomainError("per_user_throughput: cell has no active users");
  return timing.frame_duration_s / (timing.slot_duration_s * users) * frames * rho_min;
}

double handover_penalty(double prev_frames, const HandoverModel& model) {
  return prev_frames > 0.0 ? 0.0 : model.handover_cost;
}

EdgeGeometry compute_edge(const Constellation& constellation, const CellGrid& grid,
                          const LinkConfig& link, const EdgeSettings& settings, int edge_index,
                          double time_s) {
  const double R = constellation.config().earth_radius_m;
  const auto positions = constellation.propagate(time_s);

  EdgeGeometry edge;
  edge.edge_index = edge_index;
  edge.time_s = time_s;
  edge.visible_set = visible_satellites(positions, grid, settings.elevation_mask_deg, R);

  const auto populated = grid.populated_ids();
  const double sin_mask = std::sin(settings.elevation_mask_deg * std::numbers::pi / 180.0);
  std::vector<std::vector<EdgeLink>> per_cell(populated.size());
  parallel_for(populated.size(), settings.threads, [&](std::size_t i) {
    const Cell& cell = grid.cell(populated[i]);
    const Vec3 g = to_cartesian(cell.center, R);
    const Vec3 up = g * (1.0 / R);
    for (int s : edge.visible_set) {
      const Vec3& p = positions[static_cast<std::size_t>(s)];
      const Vec3 los = p - g;
      if (los.dot(up) < sin_mask * los.norm()) continue;
      const double d = max_distance_to_cell(p, cell, R);
      per_cell[i].push_back({s, cell.cell_id, d, nominal_rate(d, link)});
    }
  });
  std::size_t total = 0;
  for (const auto& v : per_cell) total += v.size();
  edge.links.reserve(total);
  for (auto& v : per_cell) edge.links.insert(edge.links.end(), v.begin(), v.end());
  return edge;
}

namespace {

bool key_less(int sat_a, int cell_a, int sat_b, int cell_b) {
  return cell_a != cell_b ? cell_a < cell_b : sat_a < sat_b;
}

}  // namespace

RateTable build_rate_table(int slot_index, const EdgeGeometry& start, const EdgeGeometry& end) {
  RateTable t;
  t.slot_index = slot_index;
  t.visible_set = start.visible_set;
  t.entries.reserve(start.links.size());
  // both link lists are sorted by (cell, sat): merge
  std::size_t j = 0;
  for (const auto& a : start.links) {
    while (j < end.links.size() && key_less(end.links[j].sat, end.links[j].cell, a.sat, a.cell)) ++j;
    double next = 0.0;
    if (j < end.links.size() && end.links[j].sat == a.sat && end.links[j].cell == a.cell)
      next = end.links[j].rate_bps;
    t.entries.push_back({a.sat, a.cell, a.distance_m, a.rate_bps, next, min_rate(a.rate_bps, next)});
  }
  return t;
}

const RateEntry* RateTable::find(int sat, int cell) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{sat, cell},
                             [](const RateEntry& e, const std::pair<int, int>& k) {
                               return key_less(e.sat, e.cell, k.first, k.second);
                             });
  if (it == entries.end() || it->sat != sat || it->cell != cell) return nullptr;
  return &*it;
}

std::size_t RateTable::usable_pairs() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const RateEntry& e) { return e.rho_min_bps > 0.0; }));
}

void write_rate_table_csv(std::ostream& os, const RateTable& table, bool header) {
  if (header) os << "slot,sat_id,cell_id,d_m,rho_bps,rho_min_bps\n";
  const auto old = os.precision(12);
  for (const auto& e : table.entries)
    os << table.slot_index << ',' << e.sat << ',' << e.cell << ',' << e.distance_m << ','
       << e.rho_bps << ',' << e.rho_min_bps << '\n';
  os.precision(old);
}

}  // namespace leo
