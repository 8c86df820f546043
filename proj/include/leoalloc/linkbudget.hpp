#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "leoalloc/geodata.hpp"
#include "leoalloc/orbital.hpp"

namespace leo {

double db_to_linear(double db);
double linear_to_db(double lin);

/// Link parameters, all linear. Build from dB figures with `from_db`.
struct LinkConfig {
  double carrier_frequency_hz = 2e9;
  double tx_power_w = 75.35;
  double sat_antenna_gain = 1000.0;  // 30 dBi
  double user_antenna_gain = 1.0;    // 0 dBi
  double atmospheric_loss = 1.1220184543019633;  // 0.5 dB
  double pointing_loss = 1.9952623149688795;     // 3 dB
  double bandwidth_hz = 30e6;
  double noise_power_w = 6.025595860743581e-13;  // -122.2 dBW
  double speed_of_light = 299792458.0;

  struct Db {
    double carrier_frequency_hz = 2e9;
    double tx_power_w = 75.35;
    double sat_antenna_gain_dbi = 30.0;
    double user_antenna_gain_dbi = 0.0;
    double atmospheric_loss_db = 0.5;
    double pointing_loss_db = 3.0;
    double bandwidth_hz = 30e6;
    double noise_power_dbw = -122.2;
  };
  static LinkConfig from_db(const Db& db);

  void validate() const;
};

struct TimingConfig {
  double slot_duration_s = 10.0;
  double frame_duration_s = 0.01;
  int beams_per_satellite = 10;
  int num_slots = 100;
  double epoch_s = 0.0;  // time of slot 0's leading edge

  /// N_T = T / T_F.
  int frames_per_slot() const;
  /// N_T * N_B, the per-satellite frame budget.
  int satellite_budget() const { return frames_per_slot() * beams_per_satellite; }
  double slot_start(int k) const { return epoch_s + k * slot_duration_s; }
  void validate() const;
};

struct HandoverModel {
  double handover_cost = 0.0;
  void validate() const;
};

/// Worst-case attenuation: (4 pi d f / c)^2 * atmospheric * pointing.
double path_loss(double distance_m, const LinkConfig& cfg);

/// Shannon rate at the worst-case attenuation for `distance_m`.
double nominal_rate(double distance_m, const LinkConfig& cfg);

inline double min_rate(double rho_start, double rho_end) {
  return rho_start < rho_end ? rho_start : rho_end;
}

/// Throughput of every user in a cell of `users` users that gets `frames`
/// frames at rate `rho_min`. Throws DomainError for users <= 0.
double per_user_throughput(double frames, double rho_min, double users, const TimingConfig& timing);

/// 0 when the pair was served in the previous slot, the handover cost otherwise.
double handover_penalty(double prev_frames, const HandoverModel& model);

/// One satellite-cell link available at a slot edge.
struct EdgeLink {
  int sat = 0;
  int cell = 0;
  double distance_m = 0.0;
  double rate_bps = 0.0;
};

/// Geometry and nominal rates at one slot edge (time epoch + k T). Links are
/// kept only for populated cells that see the satellite above the mask, and
/// are sorted by (cell, sat).
struct EdgeGeometry {
  int edge_index = 0;
  double time_s = 0.0;
  std::vector<int> visible_set;
  std::vector<EdgeLink> links;
};

struct EdgeSettings {
  double elevation_mask_deg = 30.0;
  int threads = 1;
};

EdgeGeometry compute_edge(const Constellation& constellation, const CellGrid& grid,
                          const LinkConfig& link, const EdgeSettings& settings, int edge_index,
                          double time_s);

struct RateEntry {
  int sat = 0;
  int cell = 0;
  double distance_m = 0.0;    // at the slot's leading edge
  double rho_bps = 0.0;       // nominal rate at the leading edge
  double rho_next_bps = 0.0;  // nominal rate at the trailing edge, 0 if not visible
  double rho_min_bps = 0.0;
};

/// Rates for slot k from the edges at kT and (k+1)T. Entries sorted by
/// (cell, sat); a pair that loses visibility by the trailing edge keeps its
/// entry with rho_min = 0.
struct RateTable {
  int slot_index = 0;
  std::vector<int> visible_set;
  std::vector<RateEntry> entries;

  const RateEntry* find(int sat, int cell) const;
  /// Number of entries with rho_min > 0.
  std::size_t usable_pairs() const;
};

RateTable build_rate_table(int slot_index, const EdgeGeometry& start, const EdgeGeometry& end);

/// `slot,sat_id,cell_id,d_m,rho_bps,rho_min_bps`
void write_rate_table_csv(std::ostream& os, const RateTable& table, bool header);

}  // namespace leo
