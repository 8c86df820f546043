#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leoalloc/geodata.hpp"
#include "leoalloc/linkbudget.hpp"
#include "leoalloc/solver.hpp"

namespace leo {

struct AllocationEntry {
  int sat = 0;
  int cell = 0;
  int frames = 0;
  double rho_min_bps = 0.0;
};

/// Integer frame allocation of one slot. Entries are the non-zero
/// (satellite, cell) pairs sorted by (cell, sat); `serving[c]` is the
/// satellite serving cell c or -1.
struct AllocationMatrix {
  int slot_index = 0;
  std::vector<AllocationEntry> entries;
  std::vector<int> serving;  // indexed by cell id, size = grid cells

  int frames(int sat, int cell) const;
  std::optional<int> serving_sat(int cell) const;
  /// Frames used by each satellite, keyed by flat id.
  std::vector<std::pair<int, int>> satellite_loads() const;
};

/// Returns a description of every violated constraint: per-entry cap,
/// per-satellite budget, single server per cell, serving map consistency.
std::vector<std::string> check_feasibility(const AllocationMatrix& a, const TimingConfig& timing);

/// The usable pairs of a slot (rho_min > 0, populated cell) in solver index
/// form, with the handover penalties already applied.
struct SlotProblem {
  int slot_index = 0;
  std::vector<int> cells;          // local cell index -> cell id
  std::vector<int> sats;           // local sat index -> flat id
  std::vector<int> dropped_cells;  // populated cells without a usable pair
  std::vector<double> rho_min;     // per pair
  std::vector<double> penalty;     // per pair
  RelaxedProblem relaxed;          // gains rho_min (1 - h), weights 0
};

SlotProblem build_slot_problem(const RateTable& rates, const CellGrid& grid,
                               const AllocationMatrix* prev, const HandoverModel& model,
                               const TimingConfig& timing);

/// Round half up.
std::vector<int> round_allocation(std::span<const double> relaxed);

enum class AdjustRule {
  kPenalizedRate,  // keep argmax X rho (1 - h)
  kLiteral,        // keep argmax X rho h
};

AdjustRule parse_adjust_rule(const std::string& name);

/// Repairs a rounded allocation. Conflicts: a cell with several serving
/// satellites keeps only the best-scoring one. Budgets: while a satellite is
/// over N_T N_B, decrement its positive entry with the largest X - x_hat
/// (ties to the lowest cell id). Never increases an entry.
AllocationMatrix adjust_allocation(const SlotProblem& sp, std::vector<int> frames,
                                   std::span<const double> relaxed, int num_grid_cells,
                                   AdjustRule rule = AdjustRule::kPenalizedRate);

/// Cells with two or more pairs above `threshold` frames.
int count_conflicts(const SlotProblem& sp, std::span<const double> values, double threshold = 0.0);

struct GlobalDiagnostics {
  int conflicts_relaxed = 0;       // x_hat entries > 0.5 from >= 2 satellites
  int conflicts_pre_adjust = 0;    // after rounding, before adjustment
  int dropped_cells = 0;
  double beta = 0.0;
  std::vector<double> objectives;  // per reweighting iteration
  std::vector<double> kkt_residuals;
  std::vector<int> solver_steps;
  std::vector<IterationRecord> history;  // concatenated, when recorded
  bool all_converged = true;
  bool rate_clamp_active = false;
  double runtime_s = 0.0;
  std::vector<double> relaxed;  // final x_hat, aligned with the slot problem
};

struct GlobalResult {
  AllocationMatrix allocation;
  GlobalDiagnostics diagnostics;
};

/// Reweighting numerator used when SolverConfig::beta is unset: the typical
/// frame price times tau, so an unserved pair starts at about one frame price.
double default_beta(const SlotProblem& sp, const SolverConfig& cfg);

/// Reweighted-l1 global allocation: n_iter rounds of {solve relaxed problem,
/// w = beta / (tau + x_hat)}, then rounding and adjustment. `warm_start`,
/// aligned with the pairs of `sp`, seeds the first solve (see `carry_over`).
GlobalResult global_allocate(const SlotProblem& sp, const SolverConfig& cfg, int num_grid_cells,
                             AdjustRule rule = AdjustRule::kPenalizedRate,
                             std::optional<std::span<const double>> warm_start = {});

/// Re-indexes per-pair values of one slot problem onto the pairs of another
/// by (satellite, cell); pairs absent from `from` get 0.
std::vector<double> carry_over(const SlotProblem& from, std::span<const double> values,
                               const SlotProblem& to);

enum class MatchingWeight {
  kPenalizedRate,  // rho_min (1 - h)
  kRawRate,        // rho_min
  kRatePerUser,    // rho_min (1 - h) / users the satellite can see
};

MatchingWeight parse_matching_weight(const std::string& name);

struct MatchingConfig {
  MatchingWeight weight_rule = MatchingWeight::kPenalizedRate;
};

/// For each local cell the local index of its matched satellite (argmax of
/// the weight, ties to the lowest flat id).
std::vector<int> match_cells(const SlotProblem& sp, const MatchingConfig& cfg);

struct DistributedResult {
  AllocationMatrix allocation;
  std::vector<int> matching;  // local cell -> local sat
  double runtime_s = 0.0;
  int dropped_cells = 0;
};

/// Matching followed by the per-satellite water-filling, rounding and the
/// budget repair.
DistributedResult distributed_allocate(const SlotProblem& sp, const MatchingConfig& cfg,
                                       const TimingConfig& timing, int num_grid_cells);

/// `slot,cell_id,sat_id,frames,rho_min_bps,per_user_bps`
void write_allocation_csv(std::ostream& os, const AllocationMatrix& a, const CellGrid& grid,
                          const TimingConfig& timing);

}  // namespace leo
