#include "leoalloc/allocator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <queue>
#include <tuple>

#include "leoalloc/errors.hpp"

namespace leo {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int AllocationMatrix::frames(int sat, int cell) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{cell, sat},
                             [](const AllocationEntry& e, const std::pair<int, int>& k) {
                               return std::tie(e.cell, e.sat) < std::tie(k.first, k.second);
                             });
  return it != entries.end() && it->cell == cell && it->sat == sat ? it->frames : 0;
}

std::optional<int> AllocationMatrix::serving_sat(int cell) const {
  if (cell < 0 || cell >= static_cast<int>(serving.size()) || serving[static_cast<std::size_t>(cell)] < 0)
    return std::nullopt;
  return serving[static_cast<std::size_t>(cell)];
}

std::vector<std::pair<int, int>> AllocationMatrix::satellite_loads() const {
  std::map<int, int> load;
  for (const auto& e : entries) load[e.sat] += e.frames;
  return {load.begin(), load.end()};
}

std::vector<std::string> check_feasibility(const AllocationMatrix& a, const TimingConfig& timing) {
  std::vector<std::string> problems;
  const int cap = timing.frames_per_slot();
  const int budget = timing.satellite_budget();
  std::map<int, int> servers;
  for (const auto& e : a.entries) {
    if (e.frames < 0 || e.frames > cap)
      problems.push_back("entry (" + std::to_string(e.sat) + "," + std::to_string(e.cell) +
                         ") has " + std::to_string(e.frames) + " frames");
    if (e.frames > 0) {
      ++servers[e.cell];
      if (a.serving_sat(e.cell) != e.sat)
        problems.push_back("serving map disagrees with entries for cell " + std::to_string(e.cell));
    }
  }
  for (const auto& [sat, load] : a.satellite_loads())
    if (load > budget)
      problems.push_back("satellite " + std::to_string(sat) + " uses " + std::to_string(load) +
                         " frames > budget " + std::to_string(budget));
  for (const auto& [cell, n] : servers)
    if (n > 1) problems.push_back("cell " + std::to_string(cell) + " has " + std::to_string(n) + " servers");
  for (std::size_t c = 0; c < a.serving.size(); ++c)
    if (a.serving[c] >= 0 && a.frames(a.serving[c], static_cast<int>(c)) <= 0)
      problems.push_back("cell " + std::to_string(c) + " marked served without frames");
  return problems;
}

SlotProblem build_slot_problem(const RateTable& rates, const CellGrid& grid,
                               const AllocationMatrix* prev, const HandoverModel& model,
                               const TimingConfig& timing) {
  model.validate();
  timing.validate();
  SlotProblem sp;
  sp.slot_index = rates.slot_index;

  int max_sat = -1;
  for (const auto& e : rates.entries) max_sat = std::max(max_sat, e.sat);
  std::vector<int> sat_local(static_cast<std::size_t>(max_sat + 1), -1);
  for (const auto& e : rates.entries)
    if (e.rho_min_bps > 0.0 && grid.cell(e.cell).active_users > 0.0) sat_local[static_cast<std::size_t>(e.sat)] = 0;
  for (int s = 0; s <= max_sat; ++s)
    if (sat_local[static_cast<std::size_t>(s)] == 0) {
      sat_local[static_cast<std::size_t>(s)] = static_cast<int>(sp.sats.size());
      sp.sats.push_back(s);
    }

  auto& r = sp.relaxed;
  r.num_sats = static_cast<int>(sp.sats.size());
  r.frame_cap = timing.frames_per_slot();
  r.budget = timing.satellite_budget();
  r.frame_fraction = timing.frame_duration_s / timing.slot_duration_s;

  std::vector<bool> covered(static_cast<std::size_t>(grid.size()), false);
  int current_cell = -1;
  for (const auto& e : rates.entries) {
    if (!(e.rho_min_bps > 0.0)) continue;
    const double users = grid.cell(e.cell).active_users;
    if (!(users > 0.0)) continue;
    if (e.cell != current_cell) {
      current_cell = e.cell;
      sp.cells.push_back(e.cell);
      r.users.push_back(users);
      covered[static_cast<std::size_t>(e.cell)] = true;
    }
    double h = 0.0;
    if (prev != nullptr) h = handover_penalty(prev->serving_sat(e.cell) == e.sat ? 1.0 : 0.0, model);
    r.pair_sat.push_back(sat_local[static_cast<std::size_t>(e.sat)]);
    r.pair_cell.push_back(static_cast<int>(sp.cells.size()) - 1);
    r.pair_gain.push_back(e.rho_min_bps * (1.0 - h));
    r.pair_weight.push_back(0.0);
    sp.rho_min.push_back(e.rho_min_bps);
    sp.penalty.push_back(h);
  }
  r.num_cells = static_cast<int>(sp.cells.size());
  for (int id : grid.populated_ids())
    if (!covered[static_cast<std::size_t>(id)]) sp.dropped_cells.push_back(id);
  if (r.num_cells > 0) r.finalize();
  return sp;
}

std::vector<int> round_allocation(std::span<const double> relaxed) {
  std::vector<int> out(relaxed.size());
  for (std::size_t i = 0; i < relaxed.size(); ++i)
    out[i] = static_cast<int>(std::floor(relaxed[i] + 0.5));
  return out;
}

AdjustRule parse_adjust_rule(const std::string& name) {
  if (name == "penalized_rate" || name == "penalized") return AdjustRule::kPenalizedRate;
  if (name == "literal") return AdjustRule::kLiteral;
  throw ConfigError("unknown adjust rule '" + name + "'");
}

AllocationMatrix adjust_allocation(const SlotProblem& sp, std::vector<int> frames,
                                   std::span<const double> relaxed, int num_grid_cells,
                                   AdjustRule rule) {
  const auto& r = sp.relaxed;
  const std::size_t n = r.num_pairs();
  if (frames.size() != n || relaxed.size() != n)
    throw DomainError("adjust_allocation: allocation size differs from the slot problem");

  // conflicts: one server per cell
  for (int c = 0; c < r.num_cells; ++c) {
    const int b = r.cell_begin[static_cast<std::size_t>(c)];
    const int e = r.cell_begin[static_cast<std::size_t>(c) + 1];
    int servers = 0;
    for (int i = b; i < e; ++i) servers += frames[static_cast<std::size_t>(i)] > 0;
    if (servers <= 1) continue;
    int best = -1;
    double best_score = -1.0;
    for (int i = b; i < e; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (frames[iu] <= 0) continue;
      const double h = sp.penalty[iu];
      const double score = frames[iu] * sp.rho_min[iu] * (rule == AdjustRule::kLiteral ? h : 1.0 - h);
      // pairs within a cell are ordered by flat id, so strict > keeps the lowest on ties
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    for (int i = b; i < e; ++i)
      if (i != best) frames[static_cast<std::size_t>(i)] = 0;
  }

  // budgets
  for (int s = 0; s < r.num_sats; ++s) {
    const int b = r.sat_begin[static_cast<std::size_t>(s)];
    const int e = r.sat_begin[static_cast<std::size_t>(s) + 1];
    long long used = 0;
    for (int j = b; j < e; ++j) used += frames[static_cast<std::size_t>(r.sat_pairs[static_cast<std::size_t>(j)])];
    if (used <= static_cast<long long>(r.budget)) continue;
    // max-heap on (overshoot, -cell); the pair index breaks nothing since
    // a satellite has one pair per cell
    using Item = std::tuple<double, int, int>;
    std::priority_queue<Item> heap;
    for (int j = b; j < e; ++j) {
      const int i = r.sat_pairs[static_cast<std::size_t>(j)];
      const auto iu = static_cast<std::size_t>(i);
      if (frames[iu] > 0) heap.emplace(frames[iu] - relaxed[iu], -r.pair_cell[iu], i);
    }
    while (used > static_cast<long long>(r.budget) && !heap.empty()) {
      auto [gap, neg_cell, i] = heap.top();
      heap.pop();
      auto& f = frames[static_cast<std::size_t>(i)];
      --f;
      --used;
      if (f > 0) heap.emplace(gap - 1.0, neg_cell, i);
    }
  }

  AllocationMatrix out;
  out.slot_index = sp.slot_index;
  out.serving.assign(static_cast<std::size_t>(num_grid_cells), -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (frames[i] <= 0) continue;
    const int cell = sp.cells[static_cast<std::size_t>(r.pair_cell[i])];
    const int sat = sp.sats[static_cast<std::size_t>(r.pair_sat[i])];
    out.entries.push_back({sat, cell, frames[i], sp.rho_min[i]});
    out.serving[static_cast<std::size_t>(cell)] = sat;
  }
  return out;
}

int count_conflicts(const SlotProblem& sp, std::span<const double> values, double threshold) {
  const auto& r = sp.relaxed;
  int conflicts = 0;
  for (int c = 0; c < r.num_cells; ++c) {
    int servers = 0;
    for (int i = r.cell_begin[static_cast<std::size_t>(c)]; i < r.cell_begin[static_cast<std::size_t>(c) + 1]; ++i)
      servers += values[static_cast<std::size_t>(i)] > threshold;
    conflicts += servers >= 2;
  }
  return conflicts;
}

double default_beta(const SlotProblem& sp, const SolverConfig& cfg) {
  if (sp.relaxed.num_cells == 0) return 0.0;
  return price_scale(sp.relaxed) * cfg.tau;
}

GlobalResult global_allocate(const SlotProblem& sp, const SolverConfig& cfg, int num_grid_cells,
                             AdjustRule rule,
                             std::optional<std::span<const double>> warm_start) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  GlobalResult res;
  auto& diag = res.diagnostics;
  diag.dropped_cells = static_cast<int>(sp.dropped_cells.size());
  diag.beta = cfg.beta.value_or(default_beta(sp, cfg));

  if (sp.relaxed.num_cells == 0) {
    res.allocation.slot_index = sp.slot_index;
    res.allocation.serving.assign(static_cast<std::size_t>(num_grid_cells), -1);
    diag.runtime_s = seconds_since(t0);
    return res;
  }

  RelaxedProblem problem = sp.relaxed;
  std::fill(problem.pair_weight.begin(), problem.pair_weight.end(), 0.0);
  std::vector<double> xhat;
  if (warm_start && warm_start->size() == problem.num_pairs()) xhat.assign(warm_start->begin(), warm_start->end());
  for (int n = 1; n <= cfg.n_iter; ++n) {
    auto sol = xhat.empty() ? solve_relaxed_global(problem, cfg)
                            : solve_relaxed_global(problem, cfg, std::span<const double>(xhat));
    diag.objectives.push_back(sol.objective);
    diag.kkt_residuals.push_back(sol.kkt_residual);
    diag.solver_steps.push_back(sol.steps);
    diag.all_converged = diag.all_converged && sol.converged;
    diag.rate_clamp_active = diag.rate_clamp_active || sol.rate_clamp_active;
    diag.history.insert(diag.history.end(), sol.history.begin(), sol.history.end());
    xhat = std::move(sol.values);
    if (n < cfg.n_iter)
      for (std::size_t i = 0; i < xhat.size(); ++i) problem.pair_weight[i] = diag.beta / (cfg.tau + xhat[i]);
  }

  diag.conflicts_relaxed = count_conflicts(sp, xhat, 0.5);
  auto rounded = round_allocation(xhat);
  {
    std::vector<double> as_real(rounded.begin(), rounded.end());
    diag.conflicts_pre_adjust = count_conflicts(sp, as_real, 0.0);
  }
  res.allocation = adjust_allocation(sp, std::move(rounded), xhat, num_grid_cells, rule);
  diag.relaxed = std::move(xhat);
  diag.runtime_s = seconds_since(t0);
  return res;
}

std::vector<double> carry_over(const SlotProblem& from, std::span<const double> values,
                               const SlotProblem& to) {
  if (values.size() != from.relaxed.num_pairs())
    throw DomainError("carry_over: values do not match the source problem");
  const auto& a = from.relaxed;
  const auto& b = to.relaxed;
  std::vector<double> out(b.num_pairs(), 0.0);
  // both problems list cells in ascending id and pairs within a cell in
  // ascending flat id, so a merge walk suffices
  std::size_t i = 0;
  for (std::size_t j = 0; j < b.num_pairs(); ++j) {
    const auto key_b = std::pair{to.cells[static_cast<std::size_t>(b.pair_cell[j])], to.sats[static_cast<std::size_t>(b.pair_sat[j])]};
    while (i < a.num_pairs()) {
      const auto key_a = std::pair{from.cells[static_cast<std::size_t>(a.pair_cell[i])], from.sats[static_cast<std::size_t>(a.pair_sat[i])]};
      if (key_a >= key_b) {
        if (key_a == key_b) out[j] = values[i];
        break;
      }
      ++i;
    }
  }
  return out;
}

MatchingWeight parse_matching_weight(const std::string& name) {
  if (name == "penalized_rate") return MatchingWeight::kPenalizedRate;
  if (name == "raw_rate") return MatchingWeight::kRawRate;
  if (name == "rate_per_user") return MatchingWeight::kRatePerUser;
  throw ConfigError("unknown matching weight rule '" + name + "'");
}

std::vector<int> match_cells(const SlotProblem& sp, const MatchingConfig& cfg) {
  const auto& r = sp.relaxed;
  std::vector<double> visible_users(static_cast<std::size_t>(r.num_sats), 0.0);
  if (cfg.weight_rule == MatchingWeight::kRatePerUser)
    for (std::size_t i = 0; i < r.num_pairs(); ++i)
      visible_users[static_cast<std::size_t>(r.pair_sat[i])] += r.users[static_cast<std::size_t>(r.pair_cell[i])];

  std::vector<int> match(static_cast<std::size_t>(r.num_cells), -1);
  for (int c = 0; c < r.num_cells; ++c) {
    double best = -1.0;
    for (int i = r.cell_begin[static_cast<std::size_t>(c)]; i < r.cell_begin[static_cast<std::size_t>(c) + 1]; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      double w = sp.rho_min[iu];
      if (cfg.weight_rule != MatchingWeight::kRawRate) w *= 1.0 - sp.penalty[iu];
      if (cfg.weight_rule == MatchingWeight::kRatePerUser)
        w /= visible_users[static_cast<std::size_t>(r.pair_sat[iu])];
      // pairs of a cell are in ascending flat id, so strict > keeps the lowest on ties
      if (w > best) {
        best = w;
        match[static_cast<std::size_t>(c)] = r.pair_sat[iu];
      }
    }
  }
  return match;
}

DistributedResult distributed_allocate(const SlotProblem& sp, const MatchingConfig& cfg,
                                       const TimingConfig& timing, int num_grid_cells) {
  const auto t0 = std::chrono::steady_clock::now();
  DistributedResult res;
  res.dropped_cells = static_cast<int>(sp.dropped_cells.size());
  const auto& r = sp.relaxed;
  res.matching = match_cells(sp, cfg);

  // matched pair of each cell, grouped by satellite
  std::vector<std::vector<int>> by_sat(static_cast<std::size_t>(r.num_sats));
  for (int c = 0; c < r.num_cells; ++c) {
    const int s = res.matching[static_cast<std::size_t>(c)];
    for (int i = r.cell_begin[static_cast<std::size_t>(c)]; i < r.cell_begin[static_cast<std::size_t>(c) + 1]; ++i)
      if (r.pair_sat[static_cast<std::size_t>(i)] == s) by_sat[static_cast<std::size_t>(s)].push_back(i);
  }

  std::vector<double> xhat(r.num_pairs(), 0.0);
  std::vector<double> users, rates, pens;
  for (const auto& pairs : by_sat) {
    users.clear();
    rates.clear();
    pens.clear();
    for (int i : pairs) {
      const auto iu = static_cast<std::size_t>(i);
      users.push_back(r.users[static_cast<std::size_t>(r.pair_cell[iu])]);
      rates.push_back(sp.rho_min[iu]);
      pens.push_back(sp.penalty[iu]);
    }
    const auto local = solve_local(users, rates, pens, timing);
    for (std::size_t k = 0; k < pairs.size(); ++k) xhat[static_cast<std::size_t>(pairs[k])] = local.values[k];
  }
  res.allocation = adjust_allocation(sp, round_allocation(xhat), xhat, num_grid_cells);
  res.runtime_s = seconds_since(t0);
  return res;
}

void write_allocation_csv(std::ostream& os, const AllocationMatrix& a, const CellGrid& grid,
                          const TimingConfig& timing) {
  os << "slot,cell_id,sat_id,frames,rho_min_bps,per_user_bps\n";
  const auto old = os.precision(12);
  for (const auto& e : a.entries) {
    const double users = grid.cell(e.cell).active_users;
    os << a.slot_index << ',' << e.cell << ',' << e.sat << ',' << e.frames << ',' << e.rho_min_bps
       << ',' << per_user_throughput(e.frames, e.rho_min_bps, users, timing) << '\n';
  }
  os.precision(old);
}

}  // namespace leo
