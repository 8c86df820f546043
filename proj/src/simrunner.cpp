#include "leoalloc/simrunner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "leoalloc/errors.hpp"

namespace leo {

namespace fs = std::filesystem;

namespace {

std::string geometry_key(const ScenarioConfig& cfg) {
  auto j = scenario_to_json(cfg);
  nlohmann::json k;
  for (const char* f : {"grid", "population", "alpha", "constellation", "link", "elevation_mask_deg", "seed"})
    k[f] = j[f];
  k["slot_duration_s"] = cfg.timing.slot_duration_s;
  k["epoch_s"] = cfg.timing.epoch_s;
  return k.dump();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IngestionError("cannot write '" + p.string() + "'");
  return os;
}

std::string slot_file(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slot_%04d.csv", k);
  return buf;
}

void write_solver_log(const fs::path& p, const std::vector<IterationRecord>& history) {
  auto os = open_out(p);
  os << "iter,objective,kkt_residual,step_size\n";
  os.precision(12);
  for (const auto& h : history)
    os << h.iter << ',' << h.objective << ',' << h.kkt_residual << ',' << h.step_size << '\n';
}

}  // namespace

CellGrid build_population_grid(const ScenarioConfig& cfg) {
  const CellGrid base = build_grid(cfg.grid);
  if (cfg.population.raster_path) return load_population(base, *cfg.population.raster_path, cfg.alpha);
  return synthesize_population(base, cfg.seed, cfg.population.synthetic, cfg.alpha);
}

GeometryCache::GeometryCache(const ScenarioConfig& cfg)
    : key_(geometry_key(cfg)),
      grid_(build_population_grid(cfg)),
      constellation_(cfg.constellation),
      link_(cfg.link_config()),
      timing_(cfg.timing),
      settings_{cfg.elevation_mask_deg, cfg.threads} {}

bool GeometryCache::compatible(const ScenarioConfig& cfg) const { return geometry_key(cfg) == key_; }

const EdgeGeometry& GeometryCache::edge(int k) {
  auto it = edges_.find(k);
  if (it == edges_.end())
    it = edges_.emplace(k, compute_edge(constellation_, grid_, link_, settings_, k, timing_.slot_start(k))).first;
  return it->second;
}

const RateTable& GeometryCache::rates(int slot) {
  auto it = rates_.find(slot);
  if (it == rates_.end()) it = rates_.emplace(slot, build_rate_table(slot, edge(slot), edge(slot + 1))).first;
  return it->second;
}

void GeometryCache::release_edges_before(int k) { edges_.erase(edges_.begin(), edges_.lower_bound(k)); }

EpisodeReport run_episode(const ScenarioConfig& cfg, GeometryCache* cache, const SlotObserver& observer) {
  cfg.validate();
  std::unique_ptr<GeometryCache> own;
  if (cache == nullptr || !cache->compatible(cfg)) {
    own = std::make_unique<GeometryCache>(cfg);
    cache = own.get();
  }
  const CellGrid& grid = cache->grid();
  const auto model = cfg.handover_model();
  const int n_cells = grid.size();

  const bool write = !cfg.output_dir.empty();
  const bool solver_log = write && cfg.solver.record_iterations && cfg.algorithm == Algorithm::kGlobal;
  if (write) {
    fs::create_directories(cfg.output_dir);
    if (cfg.write_allocations) fs::create_directories(cfg.output_dir / "alloc");
    if (cfg.write_rate_tables) fs::create_directories(cfg.output_dir / "rates");
    if (solver_log) fs::create_directories(cfg.output_dir / "solver");
  }

  EpisodeReport report;
  report.algorithm = to_string(cfg.algorithm);
  report.fingerprint = cfg.fingerprint();
  std::vector<double> rate_sum(static_cast<std::size_t>(n_cells), 0.0);
  const auto users = populated_users(grid);

  std::ofstream ephemeris;
  if (write && cfg.write_ephemeris) ephemeris = open_out(cfg.output_dir / "ephemeris.csv");

  AllocationMatrix prev;
  std::optional<SlotProblem> prev_problem;
  std::vector<double> prev_relaxed;
  for (int k = 0; k < cfg.timing.num_slots; ++k) {
    try {
      const RateTable& rates = cache->rates(k);
      if (own) own->release_edges_before(k + 1);
      const SlotProblem sp = build_slot_problem(rates, grid, k > 0 ? &prev : nullptr, model, cfg.timing);

      SlotMetrics m;
      m.slot_index = k;
      m.visible_satellites = static_cast<int>(rates.visible_set.size());
      std::optional<GlobalResult> g;
      std::optional<DistributedResult> d;
      const AllocationMatrix* alloc = nullptr;
      if (cfg.algorithm == Algorithm::kGlobal) {
        std::vector<double> warm;
        if (prev_problem) warm = carry_over(*prev_problem, prev_relaxed, sp);
        g = global_allocate(sp, cfg.solver, n_cells, cfg.adjust_rule,
                            warm.empty() ? std::nullopt : std::optional<std::span<const double>>(warm));
        alloc = &g->allocation;
        m.conflicting_cells_pre_adjust = g->diagnostics.conflicts_pre_adjust;
        m.solver_runtime_s = g->diagnostics.runtime_s;
      } else {
        d = distributed_allocate(sp, cfg.matching, cfg.timing, n_cells);
        alloc = &d->allocation;
        m.solver_runtime_s = d->runtime_s;
      }

      const auto problems = check_feasibility(*alloc, cfg.timing);
      if (!problems.empty()) throw DomainError("infeasible allocation: " + problems.front());

      const auto rates_per_user = per_user_rates(*alloc, grid, cfg.timing);
      m.avg_user_throughput = average_user_throughput(users, rates_per_user);
      m.jain_index = jain_index(users, rates_per_user).value;
      if (k > 0) {
        const auto hc = count_handovers(prev, *alloc);
        m.handovers = hc.handovers;
        m.service_gaps = hc.service_gaps;
        m.acquisitions = hc.acquisitions;
      }
      const auto pop = grid.populated_ids();
      for (std::size_t i = 0; i < pop.size(); ++i) {
        rate_sum[static_cast<std::size_t>(pop[i])] += rates_per_user[i];
        m.uncovered_populated_cells += alloc->serving[static_cast<std::size_t>(pop[i])] < 0;
      }

      if (write && cfg.write_allocations) {
        auto os = open_out(cfg.output_dir / "alloc" / slot_file(k));
        write_allocation_csv(os, *alloc, grid, cfg.timing);
      }
      if (write && cfg.write_rate_tables) {
        auto os = open_out(cfg.output_dir / "rates" / slot_file(k));
        write_rate_table_csv(os, rates, true);
      }
      if (ephemeris.is_open()) {
        GeometrySnapshot snap;
        snap.slot_index = k;
        snap.epoch_time_s = cfg.timing.slot_start(k);
        snap.positions = cache->constellation().propagate(snap.epoch_time_s);
        snap.visible_set = rates.visible_set;
        write_ephemeris_csv(ephemeris, snap, k == 0);
      }
      if (solver_log) write_solver_log(cfg.output_dir / "solver" / slot_file(k), g->diagnostics.history);

      report.slots.push_back(m);
      if (observer)
        observer(SlotOutcome{sp, *alloc, rates, g ? &g->diagnostics : nullptr, d ? &*d : nullptr, report.slots.back()});
      prev = *alloc;
      if (g) {
        prev_relaxed = g->diagnostics.relaxed;
        prev_problem = sp;
      }
    } catch (const Error& e) {
      const std::string msg = "slot " + std::to_string(k) + ": " + e.what();
      if (e.kind() == std::string("config")) throw ConfigError(msg);
      if (e.kind() == std::string("ingestion")) throw IngestionError(msg);
      throw DomainError(msg);
    }
  }

  report.cell_mean_rate.assign(static_cast<std::size_t>(n_cells), std::numeric_limits<double>::quiet_NaN());
  for (int id : grid.populated_ids())
    report.cell_mean_rate[static_cast<std::size_t>(id)] =
        rate_sum[static_cast<std::size_t>(id)] / static_cast<double>(cfg.timing.num_slots);

  if (write) {
    {
      auto os = open_out(cfg.output_dir / "report.csv");
      write_report_csv(os, report, cfg.record_timing);
    }
    {
      auto os = open_out(cfg.output_dir / "summary.json");
      os << summary_json(report, cfg).dump(2) << '\n';
    }
    auto asc = open_out(cfg.output_dir / ("heatmap_" + report.algorithm + ".asc"));
    auto csv = open_out(cfg.output_dir / ("heatmap_" + report.algorithm + ".csv"));
    export_throughput_heatmap(report, grid, asc, csv);
  }
  return report;
}

void export_throughput_heatmap(const EpisodeReport& report, const CellGrid& grid, std::ostream& asc,
                               std::ostream& csv) {
  if (report.cell_mean_rate.size() != static_cast<std::size_t>(grid.size()))
    throw DomainError("heatmap: report does not match the grid");
  const auto& s = grid.spec();
  const auto old_a = asc.precision(12);
  asc << "ncols " << grid.cols() << "\nnrows " << grid.rows() << "\nxllcenter " << s.lon_min
      << "\nyllcenter " << s.lat_max - (grid.rows() - 1) * s.resolution << "\ncellsize " << s.resolution
      << "\nNODATA_value -9999\n";
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const double v = report.cell_mean_rate[static_cast<std::size_t>(grid.id_of(r, c))];
      if (c) asc << ' ';
      if (std::isnan(v))
        asc << -9999;
      else
        asc << v;
    }
    asc << '\n';
  }
  asc.precision(old_a);

  const auto old_c = csv.precision(12);
  csv << "cell_id,row,col,lat,lon,users,mean_bps\n";
  for (const auto& cell : grid.cells()) {
    const double v = report.cell_mean_rate[static_cast<std::size_t>(cell.cell_id)];
    if (std::isnan(v)) continue;
    csv << cell.cell_id << ',' << cell.row << ',' << cell.col << ',' << cell.center.lat_deg << ','
        << cell.center.lon_deg << ',' << cell.active_users << ',' << v << '\n';
  }
  csv.precision(old_c);
}

double heatmap_cv(const EpisodeReport& report) {
  double n = 0.0, s = 0.0, s2 = 0.0;
  for (double v : report.cell_mean_rate) {
    if (std::isnan(v)) continue;
    n += 1.0;
    s += v;
    s2 += v * v;
  }
  if (n == 0.0 || s == 0.0) return 0.0;
  const double mean = s / n;
  return std::sqrt(std::max(0.0, s2 / n - mean * mean)) / mean;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "h_cost") return SweepParam::kHandoverCost;
  if (name == "n_iter") return SweepParam::kIterations;
  throw ConfigError("unknown sweep parameter '" + name + "' (expected h_cost or n_iter)");
}

std::vector<SweepRow> sweep(const ScenarioConfig& cfg, SweepParam param, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values");
  GeometryCache cache(cfg);
  std::vector<SweepRow> rows;
  const std::string name = param == SweepParam::kHandoverCost ? "h_cost" : "n_iter";
  for (double v : values) {
    ScenarioConfig run = cfg;
    if (param == SweepParam::kHandoverCost) {
      run.handover_cost = v;
    } else {
      if (v < 1.0 || v != std::floor(v)) throw ConfigError("sweep: n_iter values must be positive integers");
      run.solver.n_iter = static_cast<int>(v);
    }
    if (!cfg.output_dir.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_%g", name.c_str(), v);
      run.output_dir = cfg.output_dir / buf;
    }
    rows.push_back({v, run_episode(run, &cache)});
  }
  if (!cfg.output_dir.empty()) {
    auto os = open_out(cfg.output_dir / "sweep.csv");
    write_sweep_csv(os, param, rows);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, SweepParam param, const std::vector<SweepRow>& rows) {
  os << "param,value,algorithm,mean_bps,median_jain,min_jain,total_handovers,mean_conflicts\n";
  const auto old = os.precision(12);
  const char* name = param == SweepParam::kHandoverCost ? "h_cost" : "n_iter";
  for (const auto& r : rows)
    os << name << ',' << r.value << ',' << r.report.algorithm << ',' << r.report.throughput().mean << ','
       << r.report.jain().median << ',' << r.report.jain().min << ',' << r.report.total_handovers() << ','
       << r.report.conflicts().mean << '\n';
  os.precision(old);
}

nlohmann::json inspect_slot(const ScenarioConfig& cfg, int slot) {
  cfg.validate();
  if (slot < 0) throw ConfigError("slot must be non-negative");
  GeometryCache cache(cfg);
  const RateTable& rates = cache.rates(slot);
  std::vector<double> rho_min;
  int lost = 0;
  for (const auto& e : rates.entries) {
    if (e.rho_min_bps > 0.0)
      rho_min.push_back(e.rho_min_bps);
    else
      ++lost;
  }
  const auto s = summarize(rho_min);
  const auto sp = build_slot_problem(rates, cache.grid(), nullptr, cfg.handover_model(), cfg.timing);
  return {{"slot", slot},
          {"time_s", cfg.timing.slot_start(slot)},
          {"visible_satellites", rates.visible_set.size()},
          {"populated_cells", cache.grid().populated_ids().size()},
          {"rate_entries", rates.entries.size()},
          {"usable_pairs", rates.usable_pairs()},
          {"pairs_lost_by_trailing_edge", lost},
          {"uncoverable_cells", sp.dropped_cells.size()},
          {"rho_min_bps", {{"min", s.min}, {"median", s.median}, {"mean", s.mean}, {"max", s.max}}}};
}

nlohmann::json summary_json(const EpisodeReport& r, const ScenarioConfig& cfg) {
  auto pack = [](const Summary& s) {
    return nlohmann::json{{"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
                          {"q3", s.q3},     {"min", s.min},       {"max", s.max}};
  };
  int gaps = 0, acquisitions = 0;
  for (const auto& s : r.slots) {
    gaps += s.service_gaps;
    acquisitions += s.acquisitions;
  }
  nlohmann::json j{{"algorithm", r.algorithm},
                   {"fingerprint", r.fingerprint},
                   {"slots", r.slots.size()},
                   {"handover_cost", cfg.handover_cost},
                   {"n_iter", cfg.solver.n_iter},
                   {"avg_user_throughput_bps", pack(r.throughput())},
                   {"jain_index", pack(r.jain())},
                   {"handovers_per_slot", pack(r.handovers())},
                   {"conflicting_cells_pre_adjust", pack(r.conflicts())},
                   {"total_handovers", r.total_handovers()},
                   {"total_service_gaps", gaps},
                   {"total_acquisitions", acquisitions},
                   {"heatmap_cv", heatmap_cv(r)}};
  if (cfg.record_timing) j["solver_runtime_s"] = pack(r.runtime());
  return j;
}

}  // namespace leo
