#include "leoalloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "leoalloc/errors.hpp"

namespace leo {

JainResult jain_index(std::span<const double> users, std::span<const double> rates) {
  if (users.size() != rates.size()) throw DomainError("jain_index: users and rates differ in length");
  double su = 0.0, sur = 0.0, sur2 = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    su += users[i];
    sur += users[i] * rates[i];
    sur2 += users[i] * rates[i] * rates[i];
  }
  if (!(su > 0.0)) throw DomainError("jain_index: no users");
  if (!(sur2 > 0.0)) return {0.0, true};
  return {sur * sur / (su * sur2), false};
}

double average_user_throughput(std::span<const double> users, std::span<const double> rates) {
  if (users.size() != rates.size())
    throw DomainError("average_user_throughput: users and rates differ in length");
  double su = 0.0, sur = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    su += users[i];
    sur += users[i] * rates[i];
  }
  if (!(su > 0.0)) throw DomainError("average_user_throughput: no users");
  return sur / su;
}

std::vector<double> per_user_rates(const AllocationMatrix& alloc, const CellGrid& grid,
                                   const TimingConfig& timing) {
  std::vector<double> by_cell(static_cast<std::size_t>(grid.size()), 0.0);
  for (const auto& e : alloc.entries) {
    const double u = grid.cell(e.cell).active_users;
    if (u > 0.0) by_cell[static_cast<std::size_t>(e.cell)] += per_user_throughput(e.frames, e.rho_min_bps, u, timing);
  }
  std::vector<double> out;
  out.reserve(grid.populated_ids().size());
  for (int id : grid.populated_ids()) out.push_back(by_cell[static_cast<std::size_t>(id)]);
  return out;
}

std::vector<double> populated_users(const CellGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.populated_ids().size());
  for (int id : grid.populated_ids()) out.push_back(grid.cell(id).active_users);
  return out;
}

JainResult jain_index(const AllocationMatrix& alloc, const CellGrid& grid, const TimingConfig& timing) {
  return jain_index(populated_users(grid), per_user_rates(alloc, grid, timing));
}

double average_user_throughput(const AllocationMatrix& alloc, const CellGrid& grid,
                               const TimingConfig& timing) {
  return average_user_throughput(populated_users(grid), per_user_rates(alloc, grid, timing));
}

HandoverCount count_handovers(const AllocationMatrix& prev, const AllocationMatrix& cur) {
  if (prev.slot_index + 1 != cur.slot_index)
    throw DomainError("count_handovers: slots " + std::to_string(prev.slot_index) + " and " +
                      std::to_string(cur.slot_index) + " are not consecutive");
  HandoverCount hc;
  const std::size_t n = std::max(prev.serving.size(), cur.serving.size());
  for (std::size_t c = 0; c < n; ++c) {
    const int a = c < prev.serving.size() ? prev.serving[c] : -1;
    const int b = c < cur.serving.size() ? cur.serving[c] : -1;
    if (a >= 0 && b >= 0 && a != b) ++hc.handovers;
    if (a >= 0 && b < 0) ++hc.service_gaps;
    if (a < 0 && b >= 0) ++hc.acquisitions;
  }
  return hc;
}

Summary summarize(std::vector<double> v) {
  Summary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

namespace {

template <typename F>
Summary summarize_field(const std::vector<SlotMetrics>& slots, F f) {
  std::vector<double> v;
  v.reserve(slots.size());
  for (const auto& s : slots) v.push_back(f(s));
  return summarize(std::move(v));
}

}  // namespace

Summary EpisodeReport::throughput() const {
  return summarize_field(slots, [](const SlotMetrics& s) { return s.avg_user_throughput; });
}
Summary EpisodeReport::jain() const {
  return summarize_field(slots, [](const SlotMetrics& s) { return s.jain_index; });
}
Summary EpisodeReport::handovers() const {
  return summarize_field(slots, [](const SlotMetrics& s) { return static_cast<double>(s.handovers); });
}
Summary EpisodeReport::conflicts() const {
  return summarize_field(slots, [](const SlotMetrics& s) { return static_cast<double>(s.conflicting_cells_pre_adjust); });
}
Summary EpisodeReport::runtime() const {
  return summarize_field(slots, [](const SlotMetrics& s) { return s.solver_runtime_s; });
}

int EpisodeReport::total_handovers() const {
  int n = 0;
  for (const auto& s : slots) n += s.handovers;
  return n;
}

void write_report_csv(std::ostream& os, const EpisodeReport& r, bool include_timing) {
  os << "slot,avg_bps,jain,handovers,conflicts,uncovered,solver_s\n";
  const auto old = os.precision(12);
  for (const auto& s : r.slots)
    os << s.slot_index << ',' << s.avg_user_throughput << ',' << s.jain_index << ',' << s.handovers
       << ',' << s.conflicting_cells_pre_adjust << ',' << s.uncovered_populated_cells << ','
       << (include_timing ? s.solver_runtime_s : 0.0) << '\n';
  os.precision(old);
}

}  // namespace leo
