#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "leoalloc/allocator.hpp"
#include "leoalloc/geodata.hpp"
#include "leoalloc/linkbudget.hpp"
#include "leoalloc/metrics.hpp"
#include "leoalloc/orbital.hpp"
#include "leoalloc/scenario.hpp"

namespace leo {

/// Grid with population from the raster if one is configured, else from the
/// synthetic model.
CellGrid build_population_grid(const ScenarioConfig& cfg);

/// Slot-edge geometry and rate tables for one scenario, computed on demand.
/// Edge k is shared by slots k-1 and k. Entries depend only on the grid,
/// population, constellation, link, timing and mask, so one cache serves
/// every run that differs in allocation settings alone.
class GeometryCache {
 public:
  explicit GeometryCache(const ScenarioConfig& cfg);

  const CellGrid& grid() const { return grid_; }
  const Constellation& constellation() const { return constellation_; }
  const EdgeGeometry& edge(int k);
  const RateTable& rates(int slot);
  /// True if `cfg` would produce the same geometry and rates.
  bool compatible(const ScenarioConfig& cfg) const;
  /// Drops the edge geometry of edges before `k` (rate tables are kept).
  void release_edges_before(int k);

 private:
  std::string key_;
  CellGrid grid_;
  Constellation constellation_;
  LinkConfig link_;
  TimingConfig timing_;
  EdgeSettings settings_;
  std::map<int, EdgeGeometry> edges_;
  std::map<int, RateTable> rates_;
};

/// What one slot produced; passed to the observer of `run_episode`.
struct SlotOutcome {
  const SlotProblem& problem;
  const AllocationMatrix& allocation;
  const RateTable& rates;
  const GlobalDiagnostics* global = nullptr;            // global runs only
  const DistributedResult* distributed = nullptr;       // distributed runs only
  const SlotMetrics& metrics;
};

using SlotObserver = std::function<void(const SlotOutcome&)>;

/// Runs `cfg.timing.num_slots` slots and writes the artifacts to
/// `cfg.output_dir` when it is set. Uses `cache` when given and compatible.
/// Errors from any stage are rethrown with the slot index prepended.
EpisodeReport run_episode(const ScenarioConfig& cfg, GeometryCache* cache = nullptr,
                          const SlotObserver& observer = {});

/// Per-cell mean per-user throughput as an ESRI ASCII grid (NODATA -9999
/// for unpopulated cells) and as `cell_id,row,col,lat,lon,users,mean_bps`.
void export_throughput_heatmap(const EpisodeReport& report, const CellGrid& grid,
                               std::ostream& asc, std::ostream& csv);

/// Coefficient of variation of the populated cells' mean rates.
double heatmap_cv(const EpisodeReport& report);

enum class SweepParam { kHandoverCost, kIterations };
SweepParam parse_sweep_param(const std::string& name);

struct SweepRow {
  double value = 0.0;
  EpisodeReport report;
};

/// One episode per value with a shared geometry cache. With an output dir,
/// each run goes to `<out>/<param>_<value>/` and `sweep.csv` aggregates.
std::vector<SweepRow> sweep(const ScenarioConfig& cfg, SweepParam param,
                            const std::vector<double>& values);

/// `param,value,algorithm,mean_bps,median_jain,min_jain,total_handovers,mean_conflicts`
void write_sweep_csv(std::ostream& os, SweepParam param, const std::vector<SweepRow>& rows);

/// Visible set and rate-table statistics of slot k, as a JSON object.
nlohmann::json inspect_slot(const ScenarioConfig& cfg, int slot);

nlohmann::json summary_json(const EpisodeReport& report, const ScenarioConfig& cfg);

}  // namespace leo
