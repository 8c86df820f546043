#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "leoalloc/allocator.hpp"
#include "leoalloc/geodata.hpp"
#include "leoalloc/linkbudget.hpp"

namespace leo {

struct JainResult {
  double value = 0.0;
  bool degenerate = false;  // every rate was zero
};

/// User-weighted Jain index (sum U R)^2 / (sum U * sum U R^2). Throws
/// DomainError when sum U <= 0.
JainResult jain_index(std::span<const double> users, std::span<const double> rates);

/// sum U R / sum U. Throws DomainError when sum U <= 0.
double average_user_throughput(std::span<const double> users, std::span<const double> rates);

/// Per-user rate of every populated cell of the grid under `alloc`
/// (0 for cells without service), in `grid.populated_ids()` order.
std::vector<double> per_user_rates(const AllocationMatrix& alloc, const CellGrid& grid,
                                   const TimingConfig& timing);
std::vector<double> populated_users(const CellGrid& grid);

JainResult jain_index(const AllocationMatrix& alloc, const CellGrid& grid, const TimingConfig& timing);
double average_user_throughput(const AllocationMatrix& alloc, const CellGrid& grid,
                               const TimingConfig& timing);

struct HandoverCount {
  int handovers = 0;     // served in both slots by different satellites
  int service_gaps = 0;  // served before, unserved now
  int acquisitions = 0;  // unserved before, served now
};

/// Compares serving maps of consecutive slots. Throws DomainError when the
/// slot indices are not consecutive.
HandoverCount count_handovers(const AllocationMatrix& prev, const AllocationMatrix& cur);

struct SlotMetrics {
  int slot_index = 0;
  double avg_user_throughput = 0.0;
  double jain_index = 0.0;
  int handovers = 0;
  int service_gaps = 0;
  int acquisitions = 0;
  int conflicting_cells_pre_adjust = 0;
  int uncovered_populated_cells = 0;
  int visible_satellites = 0;
  double solver_runtime_s = 0.0;
};

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(std::vector<double> values);

struct EpisodeReport {
  std::string algorithm;
  std::string fingerprint;  // hash of the scenario configuration
  std::vector<SlotMetrics> slots;
  std::vector<double> cell_mean_rate;  // per grid cell, NaN when unpopulated

  Summary throughput() const;
  Summary jain() const;
  Summary handovers() const;
  Summary conflicts() const;
  Summary runtime() const;
  int total_handovers() const;
};

/// `slot,avg_bps,jain,handovers,conflicts,uncovered,solver_s`
void write_report_csv(std::ostream& os, const EpisodeReport& r, bool include_timing = true);

}  // namespace leo
