#include "leoalloc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "leoalloc/errors.hpp"
#include "leoalloc/linkbudget.hpp"

namespace leo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SatKkt {
  double a = kInf;   // min gradient over coordinates that may decrease (free or at cap)
  double d = -kInf;  // max gradient over coordinates that may increase (free or at zero)
};

double violation(const SatKkt& k, double lambda) {
  const double up = k.a == kInf ? 0.0 : std::max(0.0, lambda - k.a);
  const double down = k.d == -kInf ? 0.0 : std::max(0.0, k.d - lambda);
  return std::max(up, down);
}

}  // namespace

StepRule parse_step_rule(const std::string& name) {
  if (name == "fixed") return StepRule::kFixed;
  if (name == "backtracking") return StepRule::kBacktracking;
  throw ConfigError("unknown pg_step_rule '" + name + "'");
}

void SolverConfig::validate() const {
  if (beta && !(*beta >= 0.0)) throw ConfigError("solver: beta must be non-negative");
  if (!(tau > 0.0)) throw ConfigError("solver: tau must be positive");
  if (n_iter < 1) throw ConfigError("solver: n_iter must be at least 1");
  if (pg_max_steps < 1) throw ConfigError("solver: pg_max_steps must be at least 1");
  if (pg_tolerance && !(*pg_tolerance > 0.0)) throw ConfigError("solver: pg_tolerance must be positive");
  if (!(fixed_step > 0.0)) throw ConfigError("solver: fixed_step must be positive");
}

void RelaxedProblem::finalize() {
  const std::size_t n = pair_sat.size();
  if (pair_cell.size() != n || pair_gain.size() != n || pair_weight.size() != n)
    throw DomainError("relaxed problem: pair arrays differ in length");
  if (users.size() != static_cast<std::size_t>(num_cells))
    throw DomainError("relaxed problem: users size differs from num_cells");
  if (!(frame_cap > 0.0) || !(budget > 0.0))
    throw ConfigError("relaxed problem: frame cap and satellite budget must be positive");
  for (double u : users)
    if (!(u > 0.0)) throw DomainError("relaxed problem: every cell needs positive users");

  cell_begin.assign(static_cast<std::size_t>(num_cells) + 1, 0);
  std::vector<int> sat_count(static_cast<std::size_t>(num_sats), 0);
  int prev_cell = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pair_cell[i];
    const int s = pair_sat[i];
    if (c < 0 || c >= num_cells || s < 0 || s >= num_sats)
      throw DomainError("relaxed problem: pair index out of range");
    if (c < prev_cell) throw DomainError("relaxed problem: pairs must be grouped by cell");
    if (!(pair_gain[i] > 0.0)) throw DomainError("relaxed problem: pair gain must be positive");
    if (!(pair_weight[i] >= 0.0)) throw DomainError("relaxed problem: weights must be non-negative");
    prev_cell = c;
    ++cell_begin[static_cast<std::size_t>(c) + 1];
    ++sat_count[static_cast<std::size_t>(s)];
  }
  for (int c = 0; c < num_cells; ++c) {
    if (cell_begin[static_cast<std::size_t>(c) + 1] == 0)
      throw DomainError("relaxed problem: cell " + std::to_string(c) + " has no usable link");
    cell_begin[static_cast<std::size_t>(c) + 1] += cell_begin[static_cast<std::size_t>(c)];
  }
  sat_begin.assign(static_cast<std::size_t>(num_sats) + 1, 0);
  for (int s = 0; s < num_sats; ++s)
    sat_begin[static_cast<std::size_t>(s) + 1] = sat_begin[static_cast<std::size_t>(s)] + sat_count[static_cast<std::size_t>(s)];
  sat_pairs.assign(n, 0);
  std::vector<int> fill(sat_begin.begin(), sat_begin.end() - 1);
  for (std::size_t i = 0; i < n; ++i)
    sat_pairs[static_cast<std::size_t>(fill[static_cast<std::size_t>(pair_sat[i])]++)] = static_cast<int>(i);
}

double objective(const RelaxedProblem& p, std::span<const double> x) {
  double f = 0.0;
  for (int c = 0; c < p.num_cells; ++c) {
    double s = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) {
      s += p.pair_gain[i] * x[i];
      f -= p.pair_weight[i] * x[i];
    }
    const double u = p.users[c];
    f += u * std::log(std::max(p.frame_fraction / u * s, kRateFloor));
  }
  return f;
}

bool gradient(const RelaxedProblem& p, std::span<const double> x, std::span<double> grad) {
  for (int c = 0; c < p.num_cells; ++c) {
    double s = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) s += p.pair_gain[i] * x[i];
    if (!(s > 0.0)) return false;
    const double k = p.users[c] / s;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i)
      grad[i] = k * p.pair_gain[i] - p.pair_weight[i];
  }
  return true;
}

double kkt_residual(const RelaxedProblem& p, std::span<const double> x, std::span<const double> grad) {
  const double bound_tol = 1e-9 * std::max(1.0, p.frame_cap);
  const double budget_tol = 1e-9 * std::max(1.0, p.budget);
  double worst = 0.0;
  for (int s = 0; s < p.num_sats; ++s) {
    SatKkt k;
    double used = 0.0;
    for (int j = p.sat_begin[s]; j < p.sat_begin[s + 1]; ++j) {
      const int i = p.sat_pairs[j];
      used += x[i];
      const bool at_zero = x[i] <= bound_tol;
      const bool at_cap = x[i] >= p.frame_cap - bound_tol;
      if (!at_zero) k.a = std::min(k.a, grad[i]);
      if (!at_cap) k.d = std::max(k.d, grad[i]);
    }
    double r = violation(k, 0.0);
    if (used >= p.budget - budget_tol) {
      // budget active: the multiplier is free in [0, inf)
      double best = r;
      for (double lam : {k.a != kInf && k.d != -kInf ? 0.5 * (k.a + k.d) : 0.0,
                         k.d != -kInf ? k.d : 0.0, k.a != kInf ? k.a : 0.0})
        if (lam >= 0.0) best = std::min(best, violation(k, lam));
      r = best;
    }
    worst = std::max(worst, r);
  }
  return worst;
}

namespace {

// Weighted projection onto {0 <= z <= cap, sum z <= budget} written to
// `out`; returns the budget multiplier mu (z = clip(y - mu w, 0, cap)).
// sum(mu) is piecewise linear and non-increasing, so Newton steps on the
// segment at hand, safeguarded by a bracket, land exactly on the root after
// finitely many segments. `mu_hint` (the previous multiplier of the same
// satellite) usually makes that one or two passes.
double project_into(std::span<const double> y, double cap, double budget, std::span<const double> metric,
                    std::span<double> out, double mu_hint) {
  const std::size_t n = y.size();
  auto w = [&](std::size_t i) { return metric.empty() ? 1.0 : metric[i]; };
  double sum = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(y[i], 0.0, cap);
    sum += out[i];
    if (y[i] > 0.0) hi = std::max(hi, y[i] / w(i));
  }
  if (sum <= budget) return 0.0;

  double lo = 0.0;
  double mu = mu_hint > lo && mu_hint < hi ? mu_hint : 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double value = 0.0, free_y = 0.0, free_w = 0.0, capped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w(i);
      const double v = y[i] - mu * wi;
      if (v >= cap) {
        capped += cap;
      } else if (v > 0.0) {
        free_y += y[i];
        free_w += wi;
      }
    }
    value = free_y - mu * free_w + capped;
    if (std::abs(value - budget) <= 1e-13 * std::max(1.0, budget)) break;
    if (value > budget)
      lo = mu;
    else
      hi = mu;
    double next = free_w > 0.0 ? (free_y + capped - budget) / free_w : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == mu || hi - lo <= 1e-15 * hi) break;
    mu = next;
  }
  double total = 0.0, free_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(y[i] - mu * w(i), 0.0, cap);
    total += out[i];
    if (out[i] > 0.0 && out[i] < cap) free_w += w(i);
  }
  // put the remaining gap on the free coordinates so the budget holds to
  // rounding; line searches near the optimum compare gains below 1e-12
  if (free_w > 0.0 && total != budget) {
    const double shift = (budget - total) / free_w;
    total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out[i] > 0.0 && out[i] < cap) out[i] = std::clamp(out[i] + shift * w(i), 0.0, cap);
      total += out[i];
    }
  }
  // rounding can leave the sum a few ulps above the budget
  if (total > budget && total > 0.0) {
    const double f = budget / total;
    for (std::size_t i = 0; i < n; ++i) out[i] *= f;
  }
  return mu;
}

}  // namespace

std::vector<double> project_box_budget(std::span<const double> y, double cap, double budget,
                                       std::span<const double> metric) {
  if (!metric.empty() && metric.size() != y.size())
    throw DomainError("project_box_budget: metric size differs from the point");
  std::vector<double> z(y.size());
  project_into(y, cap, budget, metric, z, 0.0);
  return z;
}

double price_scale(const RelaxedProblem& p) {
  double users = 0.0;
  for (double u : p.users) users += u;
  double capacity = 0.0;
  for (int s = 0; s < p.num_sats; ++s)
    capacity += std::min(p.budget, p.frame_cap * (p.sat_begin[s + 1] - p.sat_begin[s]));
  return capacity > 0.0 ? users / capacity : 0.0;
}

double default_tolerance(const RelaxedProblem& p) { return kDefaultRelativeTolerance * price_scale(p); }

namespace {

// Feasible point with positive rate in every cell: each satellite spreads its
// budget evenly over its pairs.
std::vector<double> interior_point(const RelaxedProblem& p) {
  std::vector<double> x(p.num_pairs(), 0.0);
  for (int s = 0; s < p.num_sats; ++s) {
    const int n = p.sat_begin[s + 1] - p.sat_begin[s];
    if (n == 0) continue;
    const double share = std::min(p.frame_cap, p.budget / n);
    for (int j = p.sat_begin[s]; j < p.sat_begin[s + 1]; ++j) x[p.sat_pairs[j]] = share;
  }
  return x;
}

// Clips to the box and scales each satellite down to its budget; scaling
// keeps every positive entry positive.
void clamp_and_scale(const RelaxedProblem& p, std::span<double> x) {
  for (auto& v : x) v = std::clamp(v, 0.0, p.frame_cap);
  for (int s = 0; s < p.num_sats; ++s) {
    double used = 0.0;
    for (int j = p.sat_begin[s]; j < p.sat_begin[s + 1]; ++j) used += x[p.sat_pairs[j]];
    if (used <= p.budget) continue;
    const double f = p.budget / used;
    for (int j = p.sat_begin[s]; j < p.sat_begin[s + 1]; ++j) x[p.sat_pairs[j]] *= f;
  }
}

// Warm start: the given point, with one frame on every pair of any cell it
// leaves at zero rate, scaled back into the feasible set.
std::vector<double> warm_point(const RelaxedProblem& p, std::span<const double> warm) {
  std::vector<double> x(warm.begin(), warm.end());
  for (auto& v : x) v = std::clamp(v, 0.0, p.frame_cap);
  const double seed = std::min(1.0, p.frame_cap);
  for (int c = 0; c < p.num_cells; ++c) {
    double s = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) s += p.pair_gain[i] * x[i];
    if (s > 0.0) continue;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) x[i] = seed;
  }
  clamp_and_scale(p, x);
  return x;
}

void project_all(const RelaxedProblem& p, std::span<const double> y, std::span<const double> metric,
                 std::span<double> out, std::vector<double>& mu, std::vector<double>& ybuf,
                 std::vector<double>& mbuf, std::vector<double>& zbuf) {
  mu.resize(static_cast<std::size_t>(p.num_sats), 0.0);
  for (int s = 0; s < p.num_sats; ++s) {
    const int b = p.sat_begin[s], e = p.sat_begin[s + 1];
    const auto m = static_cast<std::size_t>(e - b);
    ybuf.resize(m);
    mbuf.resize(m);
    zbuf.resize(m);
    for (int j = b; j < e; ++j) {
      ybuf[j - b] = y[p.sat_pairs[j]];
      mbuf[j - b] = metric[p.sat_pairs[j]];
    }
    mu[s] = project_into(ybuf, p.frame_cap, p.budget, mbuf, zbuf, mu[s]);
    for (int j = b; j < e; ++j) out[p.sat_pairs[j]] = zbuf[static_cast<std::size_t>(j - b)];
  }
}

// Objective for the line search: -inf once any cell loses all its rate, so
// the floor in `objective` cannot make such a point look acceptable.
double strict_objective(const RelaxedProblem& p, std::span<const double> x) {
  double f = 0.0;
  for (int c = 0; c < p.num_cells; ++c) {
    double s = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) {
      s += p.pair_gain[i] * x[i];
      f -= p.pair_weight[i] * x[i];
    }
    if (!(s > 0.0)) return -kInf;
    f += p.users[c] * std::log(p.frame_fraction / p.users[c] * s);
  }
  return f;
}

// strict_objective(to) - strict_objective(from) for a feasible `from`,
// summed per cell as U log1p(dS / S) so that tiny changes near the optimum
// do not drown in the rounding error of the totals.
double objective_change(const RelaxedProblem& p, std::span<const double> from, std::span<const double> to) {
  double d = 0.0;
  for (int c = 0; c < p.num_cells; ++c) {
    double s = 0.0, ds = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) {
      const double step = to[i] - from[i];
      s += p.pair_gain[i] * from[i];
      ds += p.pair_gain[i] * step;
      d -= p.pair_weight[i] * step;
    }
    if (!(s + ds > 0.0)) return -kInf;
    d += p.users[c] * std::log1p(ds / s);
  }
  return d;
}

// Inverse of the diagonal of the objective Hessian, split across the pairs
// of each cell.
void newton_metric(const RelaxedProblem& p, std::span<const double> x, std::span<double> metric) {
  for (int c = 0; c < p.num_cells; ++c) {
    const int b = p.cell_begin[c], e = p.cell_begin[c + 1];
    double s = 0.0;
    for (int i = b; i < e; ++i) s += p.pair_gain[i] * x[i];
    const double m = static_cast<double>(e - b);
    for (int i = b; i < e; ++i) {
      const double g = p.pair_gain[i];
      metric[i] = std::clamp(s * s / (p.users[c] * g * g * m), 1e-12, 1e12);
    }
  }
}

// Per-satellite budget multiplier implied by a feasible point: the gradient
// of its free coordinates when the budget is active, else 0.
std::vector<double> multiplier_estimate(const RelaxedProblem& p, std::span<const double> x,
                                        std::span<const double> grad) {
  const double bound_tol = 1e-9 * std::max(1.0, p.frame_cap);
  std::vector<double> lambda(static_cast<std::size_t>(p.num_sats), 0.0);
  for (int s = 0; s < p.num_sats; ++s) {
    double used = 0.0, free_max = -kInf;
    SatKkt k;
    for (int j = p.sat_begin[s]; j < p.sat_begin[s + 1]; ++j) {
      const int i = p.sat_pairs[j];
      used += x[i];
      const bool at_zero = x[i] <= bound_tol;
      const bool at_cap = x[i] >= p.frame_cap - bound_tol;
      if (!at_zero && !at_cap) free_max = std::max(free_max, grad[i]);
      if (!at_zero) k.a = std::min(k.a, grad[i]);
      if (!at_cap) k.d = std::max(k.d, grad[i]);
    }
    if (used < p.budget * (1.0 - 1e-9)) continue;
    if (free_max > -kInf)
      lambda[static_cast<std::size_t>(s)] = std::max(0.0, free_max);
    else if (k.a < kInf && k.d > -kInf)
      lambda[static_cast<std::size_t>(s)] = std::max(0.0, 0.5 * (k.a + k.d));
  }
  return lambda;
}

// The pairs of `p` flagged in `keep`, as a problem of its own.
RelaxedProblem restrict_pairs(const RelaxedProblem& p, const std::vector<char>& keep,
                              std::vector<int>& index) {
  RelaxedProblem q;
  q.num_sats = p.num_sats;
  q.num_cells = p.num_cells;
  q.frame_cap = p.frame_cap;
  q.budget = p.budget;
  q.frame_fraction = p.frame_fraction;
  q.users = p.users;
  index.clear();
  for (std::size_t i = 0; i < p.num_pairs(); ++i) {
    if (!keep[i]) continue;
    index.push_back(static_cast<int>(i));
    q.pair_sat.push_back(p.pair_sat[i]);
    q.pair_cell.push_back(p.pair_cell[i]);
    q.pair_gain.push_back(p.pair_gain[i]);
    q.pair_weight.push_back(p.pair_weight[i]);
  }
  q.finalize();
  return q;
}

struct AscentState {
  int steps = 0;
  double objective = 0.0;
  double residual = kInf;
  bool stalled = false;
};

// Projected gradient ascent in the Newton metric until the KKT residual of
// `p` drops to `tol` or `max_steps` steps are taken. With the backtracking
// rule the step carries Nesterov momentum, restarted whenever a candidate
// does not improve the objective, so accepted iterates never lose value.
AscentState ascend(const RelaxedProblem& p, std::vector<double>& x, const SolverConfig& cfg, double tol,
                   int max_steps, int iter_offset, std::vector<IterationRecord>* history) {
  const std::size_t n = p.num_pairs();
  const bool fixed = cfg.pg_step_rule == StepRule::kFixed;
  std::vector<double> g(n), gy(n), metric(n), y = x, z(n), v(n), mu, ybuf, mbuf, zbuf;
  AscentState st;
  st.objective = strict_objective(p, x);
  if (!std::isfinite(st.objective) || !gradient(p, x, g))
    throw DomainError("solve_relaxed_global: iterate has a zero-rate cell");
  st.residual = kkt_residual(p, x, g);
  double step = fixed ? cfg.fixed_step : 1.0;
  double theta = 1.0;
  while (st.residual > tol && st.steps < max_steps) {
    if (st.steps % 10 == 0) newton_metric(p, x, metric);
    ++st.steps;
    gradient(p, y, gy);
    double gain = -kInf;  // objective change from y to z
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < n; ++i) v[i] = y[i] + step * metric[i] * gy[i];
      project_all(p, v, metric, z, mu, ybuf, mbuf, zbuf);
      gain = objective_change(p, y, z);
      if (fixed) break;
      double lin = 0.0, quad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = z[i] - y[i];
        lin += gy[i] * d;
        quad += d * d / metric[i];
      }
      if (gain >= lin - quad / (2.0 * step)) break;
      step *= 0.5;
    }
    const double improvement = y == x ? gain : objective_change(p, x, z);
    if (!(improvement >= 0.0)) {
      if (fixed || step < 1e-15) {
        st.stalled = true;
        break;
      }
      // momentum overshot: restart from the current iterate
      if (y == x) {
        st.stalled = true;
        break;
      }
      y = x;
      theta = 1.0;
      continue;
    }
    if (fixed) {
      y = z;
    } else {
      const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      const double beta = (theta - 1.0) / next;
      for (std::size_t i = 0; i < n; ++i) y[i] = z[i] + beta * (z[i] - x[i]);
      clamp_and_scale(p, y);
      if (!std::isfinite(strict_objective(p, y))) y = z;
      theta = next;
      step = std::min(2.0 * step, 1e3);
    }
    std::swap(x, z);
    st.objective += improvement;
    if (history != nullptr || st.steps % 5 == 0 || st.steps == max_steps) {
      gradient(p, x, g);
      st.residual = kkt_residual(p, x, g);
    }
    if (history != nullptr) history->push_back({iter_offset + st.steps, st.objective, st.residual, step});
  }
  return st;
}

constexpr int kScreenAfter = 100;     // full-problem steps before the first screening
constexpr double kScreenBand = 1e-3;  // relative reduced-gradient band kept in the working set
constexpr int kMaxRounds = 30;

}  // namespace

RelaxedAllocation solve_relaxed_global(const RelaxedProblem& p, const SolverConfig& cfg,
                                       std::optional<std::span<const double>> warm_start) {
  cfg.validate();
  const std::size_t n = p.num_pairs();
  if (p.cell_begin.size() != static_cast<std::size_t>(p.num_cells) + 1)
    throw DomainError("solve_relaxed_global: problem not finalized");
  const double tol = cfg.pg_tolerance.value_or(default_tolerance(p));
  const double price = price_scale(p);

  RelaxedAllocation out;
  std::vector<double> x = warm_start && warm_start->size() == n ? warm_point(p, *warm_start) : interior_point(p);
  std::vector<double> g(n);
  if (!gradient(p, x, g)) throw DomainError("solve_relaxed_global: starting point has a zero-rate cell");
  double res = kkt_residual(p, x, g);
  auto* history = cfg.record_iterations ? &out.history : nullptr;
  if (history != nullptr) history->push_back({0, objective(p, x), res, 0.0});

  // Most pairs are zero at the optimum and the objective is flat along the
  // directions that trade frames between satellites of one cell, which is
  // where plain gradient steps crawl. After a warm-up on the whole problem,
  // the ascent runs on a working set (pairs carrying frames or within a
  // small band of their satellite's price); the full KKT check decides when
  // to stop and readmits any pair that wants frames.
  int steps = 0;
  {
    const double warm_tol = std::max(tol, 1e-2 * price);
    const auto st = ascend(p, x, cfg, warm_tol, std::min(kScreenAfter, cfg.pg_max_steps), 0, history);
    steps += st.steps;
  }
  gradient(p, x, g);
  res = kkt_residual(p, x, g);

  double band = kScreenBand;
  std::vector<char> keep(n, 1), prev_keep;
  std::vector<int> index;
  for (int round = 0; round < kMaxRounds && res > tol && steps < cfg.pg_max_steps; ++round) {
    const auto lambda = multiplier_estimate(p, x, g);
    const double small = 1e-3 * p.frame_cap;
    for (int c = 0; c < p.num_cells; ++c) {
      int best = p.cell_begin[c];
      for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) {
        const double reduced = g[i] - lambda[static_cast<std::size_t>(p.pair_sat[i])];
        keep[i] = x[i] >= small || reduced > -band * price;
        if (x[i] > x[best]) best = i;
      }
      keep[best] = 1;
    }
    if (keep == prev_keep) {
      band *= 10.0;
      if (band > 1.0) std::fill(keep.begin(), keep.end(), 1);
    }
    prev_keep = keep;

    const RelaxedProblem q = restrict_pairs(p, keep, index);
    std::vector<double> xq(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) xq[k] = x[static_cast<std::size_t>(index[k])];
    const auto st = ascend(q, xq, cfg, tol, cfg.pg_max_steps - steps, steps, history);
    steps += st.steps;
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) x[static_cast<std::size_t>(index[k])] = xq[k];
    gradient(p, x, g);
    res = kkt_residual(p, x, g);
    if (st.stalled && st.residual > tol && keep == std::vector<char>(n, 1)) break;
  }

  out.steps = steps;
  out.objective = objective(p, x);
  out.kkt_residual = res;
  out.converged = res <= tol;
  for (int c = 0; c < p.num_cells && !out.rate_clamp_active; ++c) {
    double s = 0.0;
    for (int i = p.cell_begin[c]; i < p.cell_begin[c + 1]; ++i) s += p.pair_gain[i] * x[i];
    if (p.frame_fraction / p.users[c] * s <= kRateFloor) out.rate_clamp_active = true;
  }
  out.values = std::move(x);
  return out;
}

std::vector<double> water_fill(std::span<const double> users, double cap, double budget) {
  const std::size_t n = users.size();
  std::vector<double> x(n, 0.0);
  if (n == 0) return x;
  if (static_cast<double>(n) * cap <= budget) {
    std::fill(x.begin(), x.end(), cap);
    return x;
  }
  // iterative capping: cap the cells whose share would exceed `cap`, re-solve
  // the rest; at most n rounds
  std::vector<bool> capped(n, false);
  std::size_t n_capped = 0;
  for (std::size_t round = 0; round <= n; ++round) {
    double free_users = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!capped[i]) free_users += users[i];
    const double remaining = budget - cap * static_cast<double>(n_capped);
    const double lambda = free_users / remaining;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!capped[i] && users[i] / lambda > cap) {
        capped[i] = true;
        ++n_capped;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t i = 0; i < n; ++i) x[i] = capped[i] ? cap : users[i] / lambda;
      return x;
    }
  }
  return x;
}

LocalSolution solve_local(std::span<const double> users, std::span<const double> rates,
                          std::span<const double> penalties, const TimingConfig& timing) {
  const std::size_t n = users.size();
  if (rates.size() != n || penalties.size() != n)
    throw DomainError("solve_local: users, rates and penalties differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(users[i] > 0.0)) throw DomainError("solve_local: matched cell without active users");
    if (!(rates[i] > 0.0)) throw DomainError("solve_local: matched cell with zero rate");
    if (!(penalties[i] >= 0.0 && penalties[i] < 1.0))
      throw DomainError("solve_local: penalty outside [0, 1)");
  }
  LocalSolution out;
  out.values = water_fill(users, timing.frames_per_slot(), timing.satellite_budget());
  const double frac = timing.frame_duration_s / timing.slot_duration_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = frac / users[i] * out.values[i] * rates[i] * (1.0 - penalties[i]);
    out.objective += users[i] * std::log(std::max(r, kRateFloor));
  }
  return out;
}

}  // namespace leo
