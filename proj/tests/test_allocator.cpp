#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "leoalloc/allocator.hpp"
#include "leoalloc/errors.hpp"

using namespace leo;

namespace {

// 1 x n grid at 1 deg with the given active users per cell.
CellGrid line_grid(const std::vector<double>& users) {
  GridSpec s;
  s.lat_min = 45.0;
  s.lat_max = 45.5;
  s.lon_min = 0.0;
  s.lon_max = static_cast<double>(users.size()) - 0.5;
  s.resolution = 1.0;
  CellGrid g{s};
  g.set_population(users, 1.0);
  return g;
}

RateTable table(int slot, std::vector<std::tuple<int, int, double>> links) {
  std::sort(links.begin(), links.end(), [](const auto& a, const auto& b) {
    return std::pair{std::get<1>(a), std::get<0>(a)} < std::pair{std::get<1>(b), std::get<0>(b)};
  });
  RateTable t;
  t.slot_index = slot;
  for (const auto& [sat, cell, rho] : links) t.entries.push_back({sat, cell, 6e5, rho, rho, rho});
  return t;
}

AllocationMatrix served(int slot, int cells, std::vector<std::pair<int, int>> cell_sat) {
  AllocationMatrix a;
  a.slot_index = slot;
  a.serving.assign(static_cast<std::size_t>(cells), -1);
  std::sort(cell_sat.begin(), cell_sat.end());
  for (auto [c, s] : cell_sat) {
    a.entries.push_back({s, c, 10, 1e8});
    a.serving[static_cast<std::size_t>(c)] = s;
  }
  return a;
}

TimingConfig small_timing(double slot_s, int beams) {
  TimingConfig t;
  t.slot_duration_s = slot_s;
  t.frame_duration_s = 1.0;
  t.beams_per_satellite = beams;
  return t;
}

}  // namespace

TEST_CASE("slot problem keeps usable pairs of populated cells") {
  const auto grid = line_grid({10.0, 0.0, 5.0, 7.0});
  auto t = table(1, {{3, 0, 1e8}, {7, 0, 2e8}, {3, 1, 1e8}, {7, 2, 1e8}, {9, 3, 1e8}});
  t.entries.back().rho_min_bps = 0.0;  // cell 3 loses its only link by the trailing edge
  const auto sp = build_slot_problem(t, grid, nullptr, {0.3}, small_timing(4.0, 2));
  CHECK(sp.cells == std::vector<int>{0, 2});
  CHECK(sp.sats == std::vector<int>{3, 7});
  CHECK(sp.dropped_cells == std::vector<int>{3});
  CHECK(sp.relaxed.num_pairs() == 3);
  CHECK(sp.relaxed.frame_cap == 4.0);
  CHECK(sp.relaxed.budget == 8.0);
  // no previous slot: no penalties
  for (double h : sp.penalty) CHECK(h == 0.0);
}

TEST_CASE("handover penalty applies to every pair but the previous server") {
  const auto grid = line_grid({10.0, 5.0});
  const auto t = table(2, {{3, 0, 1e8}, {7, 0, 2e8}, {3, 1, 1e8}});
  const auto prev = served(1, 2, {{0, 7}});
  const auto sp = build_slot_problem(t, grid, &prev, {0.25}, small_timing(4.0, 2));
  REQUIRE(sp.penalty.size() == 3);
  CHECK(sp.penalty[0] == 0.25);  // (3, 0)
  CHECK(sp.penalty[1] == 0.0);   // (7, 0) served before
  CHECK(sp.penalty[2] == 0.25);  // cell 1 was unserved
  CHECK(sp.relaxed.pair_gain[0] == doctest::Approx(0.75e8));
  CHECK(sp.relaxed.pair_gain[1] == doctest::Approx(2e8));
}

TEST_CASE("rounding is half up") {
  CHECK(round_allocation(std::vector<double>{0.49, 0.5, 2.5, 3.0, 0.0}) == std::vector<int>{0, 1, 3, 3, 0});
}

TEST_CASE("adjustment keeps the best penalised server") {
  const auto grid = line_grid({10.0});
  const auto t = table(2, {{1, 0, 1e8}, {2, 0, 1.2e8}});
  const auto prev = served(1, 1, {{0, 1}});
  const auto sp = build_slot_problem(t, grid, &prev, {0.4}, small_timing(4.0, 2));
  // scores: sat 1 -> 2 * 1e8, sat 2 -> 2 * 1.2e8 * 0.6
  const std::vector<double> relaxed{2.0, 2.0};
  const auto a = adjust_allocation(sp, {2, 2}, relaxed, 1);
  CHECK(a.serving_sat(0) == 1);
  CHECK(a.frames(1, 0) == 2);
  CHECK(a.frames(2, 0) == 0);
  // the literal rule scores by h, which favours the new satellite
  const auto lit = adjust_allocation(sp, {2, 2}, relaxed, 1, AdjustRule::kLiteral);
  CHECK(lit.serving_sat(0) == 2);
}

TEST_CASE("adjustment ties go to the lowest satellite id") {
  const auto grid = line_grid({10.0});
  const auto sp = build_slot_problem(table(0, {{4, 0, 1e8}, {9, 0, 1e8}}), grid, nullptr, {}, small_timing(4.0, 1));
  const auto a = adjust_allocation(sp, {3, 3}, std::vector<double>{3.0, 3.0}, 1);
  CHECK(a.serving_sat(0) == 4);
}

TEST_CASE("budget repair trims the largest overshoot first") {
  const auto grid = line_grid({1.0, 1.0, 1.0});
  // one satellite, cap 4, budget 4
  const auto sp = build_slot_problem(table(0, {{0, 0, 1e8}, {0, 1, 1e8}, {0, 2, 1e8}}), grid, nullptr, {},
                                     small_timing(4.0, 1));
  const std::vector<double> relaxed{1.5, 1.5, 1.0};
  const auto a = adjust_allocation(sp, round_allocation(relaxed), relaxed, 3);
  // rounded 2, 2, 1 (5 frames): overshoots 0.5, 0.5, 0 -> cell 0 loses a frame
  CHECK(a.frames(0, 0) == 1);
  CHECK(a.frames(0, 1) == 2);
  CHECK(a.frames(0, 2) == 1);
  CHECK(check_feasibility(a, small_timing(4.0, 1)).empty());
}

TEST_CASE("adjustment never increases an entry and always ends feasible") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int cells = 1 + static_cast<int>(rng() % 6), sats = 1 + static_cast<int>(rng() % 3);
    std::vector<double> users(static_cast<std::size_t>(cells));
    for (auto& u : users) u = 1.0 + static_cast<double>(rng() % 10);
    std::vector<std::tuple<int, int, double>> links;
    for (int c = 0; c < cells; ++c)
      for (int s = 0; s < sats; ++s)
        if (s == c % sats || rng() % 2) links.emplace_back(s, c, 1e8 * (1.0 + static_cast<double>(rng() % 5)));
    const auto grid = line_grid(users);
    const auto timing = small_timing(1.0 + static_cast<double>(rng() % 4), 1 + static_cast<int>(rng() % 2));
    const auto sp = build_slot_problem(table(0, links), grid, nullptr, {}, timing);
    std::vector<double> relaxed(sp.relaxed.num_pairs());
    for (auto& x : relaxed) x = std::uniform_real_distribution<double>(0.0, sp.relaxed.frame_cap)(rng);
    const auto rounded = round_allocation(relaxed);
    const auto a = adjust_allocation(sp, rounded, relaxed, cells);
    CHECK(check_feasibility(a, timing).empty());
    for (std::size_t i = 0; i < rounded.size(); ++i) {
      const int cell = sp.cells[static_cast<std::size_t>(sp.relaxed.pair_cell[i])];
      const int sat = sp.sats[static_cast<std::size_t>(sp.relaxed.pair_sat[i])];
      CHECK(a.frames(sat, cell) <= rounded[i]);
    }
  }
}

TEST_CASE("feasibility checker reports each violation") {
  const TimingConfig t = small_timing(4.0, 1);
  AllocationMatrix a;
  a.serving = {0, 1, -1};
  a.entries = {{0, 0, 5, 1.0}, {1, 0, 1, 1.0}, {1, 1, 4, 1.0}};
  const auto problems = check_feasibility(a, t);
  auto has = [&](const std::string& text) {
    return std::any_of(problems.begin(), problems.end(),
                       [&](const std::string& p) { return p.find(text) != std::string::npos; });
  };
  CHECK(has("has 5 frames"));
  CHECK(has("satellite 1 uses 5"));
  CHECK(has("cell 0 has 2 servers"));
  CHECK(has("serving map disagrees"));
}

TEST_CASE("matching prefers the incumbent unless the newcomer is better after the penalty") {
  const auto grid = line_grid({10.0});
  const auto prev = served(0, 1, {{0, 1}});  // sat 1 = A served the cell
  const auto t = table(1, {{1, 0, 90e6}, {2, 0, 100e6}});
  const auto sp = build_slot_problem(t, grid, &prev, {0.2}, small_timing(4.0, 1));
  // 90 vs 100 * 0.8 = 80
  CHECK(sp.sats[static_cast<std::size_t>(match_cells(sp, {})[0])] == 1);
  CHECK(sp.sats[static_cast<std::size_t>(match_cells(sp, {MatchingWeight::kRawRate})[0])] == 2);
  const auto sp2 = build_slot_problem(t, grid, &prev, {0.05}, small_timing(4.0, 1));
  CHECK(sp2.sats[static_cast<std::size_t>(match_cells(sp2, {})[0])] == 2);
}

TEST_CASE("rate-per-user matching divides by the satellite's visible users") {
  const auto grid = line_grid({10.0, 100.0});
  // sat 0 sees both cells, sat 1 only cell 0
  const auto sp = build_slot_problem(table(0, {{0, 0, 2e8}, {1, 0, 1e8}, {0, 1, 1e8}}), grid, nullptr, {},
                                     small_timing(4.0, 1));
  CHECK(match_cells(sp, {})[0] == 0);
  CHECK(match_cells(sp, {MatchingWeight::kRatePerUser})[0] == 1);  // 2e8/110 < 1e8/10
}

TEST_CASE("distributed allocation water-fills each satellite") {
  const auto grid = line_grid({30.0, 10.0, 5.0});
  const auto timing = small_timing(40.0, 1);  // cap 40, budget 40
  const auto sp = build_slot_problem(table(0, {{0, 0, 1e8}, {0, 1, 1e8}, {1, 2, 1e8}}), grid, nullptr, {}, timing);
  const auto r = distributed_allocate(sp, {}, timing, 3);
  CHECK(r.allocation.frames(0, 0) == 30);
  CHECK(r.allocation.frames(0, 1) == 10);
  CHECK(r.allocation.frames(1, 2) == 40);
  CHECK(check_feasibility(r.allocation, timing).empty());
}

TEST_CASE("global allocation is feasible") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int cells = 2 + static_cast<int>(rng() % 8), sats = 1 + static_cast<int>(rng() % 3);
    std::vector<double> users(static_cast<std::size_t>(cells));
    for (auto& u : users) u = 1.0 + static_cast<double>(rng() % 50);
    std::vector<std::tuple<int, int, double>> links;
    for (int c = 0; c < cells; ++c)
      for (int s = 0; s < sats; ++s)
        if (s == c % sats || rng() % 2) links.emplace_back(s, c, 1e8 * (1.0 + static_cast<double>(rng() % 5)));
    const auto grid = line_grid(users);
    const auto timing = small_timing(100.0, 1);
    const auto sp = build_slot_problem(table(0, links), grid, nullptr, {}, timing);
    SolverConfig cfg;
    cfg.n_iter = 1 + trial % 3;
    const auto g = global_allocate(sp, cfg, cells);
    CHECK(check_feasibility(g.allocation, timing).empty());
    CHECK(g.diagnostics.all_converged);
    CHECK(g.diagnostics.objectives.size() == static_cast<std::size_t>(cfg.n_iter));
    // a cell whose best relaxed entry rounds to a frame loses service only
    // to the budget repair of an over-full satellite
    const auto& r = sp.relaxed;
    const auto rounded = round_allocation(g.diagnostics.relaxed);
    std::vector<long long> load(static_cast<std::size_t>(r.num_sats), 0);
    for (std::size_t i = 0; i < rounded.size(); ++i) load[static_cast<std::size_t>(r.pair_sat[i])] += rounded[i];
    for (int c = 0; c < r.num_cells; ++c) {
      int best = r.cell_begin[static_cast<std::size_t>(c)];
      for (int i = best; i < r.cell_begin[static_cast<std::size_t>(c) + 1]; ++i)
        if (g.diagnostics.relaxed[static_cast<std::size_t>(i)] > g.diagnostics.relaxed[static_cast<std::size_t>(best)])
          best = i;
      if (rounded[static_cast<std::size_t>(best)] >= 1 && !g.allocation.serving_sat(sp.cells[static_cast<std::size_t>(c)]))
        CHECK(load[static_cast<std::size_t>(r.pair_sat[static_cast<std::size_t>(best)])] > r.budget);
    }
  }
}

TEST_CASE("reweighting removes a split between equal satellites") {
  // two satellites, each can serve both cells at the same rate; cell 0 is
  // heavy, so at the relaxed optimum it is split
  const auto grid = line_grid({90.0, 10.0});
  const auto timing = small_timing(100.0, 1);
  const auto sp = build_slot_problem(table(0, {{0, 0, 1e8}, {1, 0, 1e8}, {0, 1, 1e8}, {1, 1, 1e8}}), grid,
                                     nullptr, {}, timing);
  SolverConfig one;
  const auto a = global_allocate(sp, one, 2);
  SolverConfig three;
  three.n_iter = 3;
  const auto b = global_allocate(sp, three, 2);
  CHECK(b.diagnostics.conflicts_relaxed <= a.diagnostics.conflicts_relaxed);
  CHECK(check_feasibility(b.allocation, timing).empty());
  CHECK(b.diagnostics.beta == doctest::Approx(default_beta(sp, three)));
}

TEST_CASE("empty slot") {
  const auto grid = line_grid({10.0});
  const auto sp = build_slot_problem(table(0, {}), grid, nullptr, {}, small_timing(4.0, 1));
  CHECK(sp.dropped_cells == std::vector<int>{0});
  const auto g = global_allocate(sp, SolverConfig{}, 1);
  CHECK(g.allocation.entries.empty());
  CHECK(g.allocation.serving == std::vector<int>{-1});
}

TEST_CASE("carry over re-indexes by satellite and cell") {
  const auto grid = line_grid({10.0, 10.0, 10.0});
  const auto timing = small_timing(4.0, 1);
  const auto a = build_slot_problem(table(0, {{1, 0, 1e8}, {2, 0, 1e8}, {2, 1, 1e8}}), grid, nullptr, {}, timing);
  const auto b = build_slot_problem(table(1, {{2, 0, 1e8}, {2, 1, 1e8}, {3, 1, 1e8}, {3, 2, 1e8}}), grid,
                                    nullptr, {}, timing);
  const auto v = carry_over(a, std::vector<double>{1.0, 2.0, 3.0}, b);
  CHECK(v == std::vector<double>{2.0, 3.0, 0.0, 0.0});
  CHECK_THROWS_AS(carry_over(a, std::vector<double>{1.0}, b), DomainError);
}

TEST_CASE("allocation csv and name parsing") {
  const auto grid = line_grid({4.0});
  AllocationMatrix a = served(3, 1, {{0, 5}});
  std::ostringstream os;
  write_allocation_csv(os, a, grid, small_timing(20.0, 1));
  // 10 of 20 frames at 1e8 shared by 4 users
  CHECK(os.str() == "slot,cell_id,sat_id,frames,rho_min_bps,per_user_bps\n3,0,5,10,100000000,12500000\n");
  CHECK(parse_adjust_rule("literal") == AdjustRule::kLiteral);
  CHECK(parse_matching_weight("rate_per_user") == MatchingWeight::kRatePerUser);
  CHECK_THROWS_AS(parse_matching_weight("x"), ConfigError);
  CHECK_THROWS_AS(parse_adjust_rule("x"), ConfigError);
}
