#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace leo {

struct TimingConfig;

enum class StepRule { kFixed, kBacktracking };

StepRule parse_step_rule(const std::string& name);

struct SolverConfig {
  /// Reweighting numerator. Unset: derived from the problem, see
  /// `default_beta`.
  std::optional<double> beta;
  double tau = 1.0;  // frames
  int n_iter = 1;
  int pg_max_steps = 5000;
  /// Stopping threshold on the KKT residual. Unset: see `default_tolerance`.
  std::optional<double> pg_tolerance;
  StepRule pg_step_rule = StepRule::kBacktracking;
  double fixed_step = 1.0;
  bool record_iterations = false;

  void validate() const;
};

/// Index form of the relaxed per-slot problem
///
///   max  sum_c U_c log( T_F/(T U_c) * sum_s gain(s,c) x(s,c) ) - sum w(s,c) x(s,c)
///   s.t. 0 <= x <= frame_cap,  sum_c x(s,c) <= budget for every s
///
/// where gain = rho_min * (1 - h). Pairs must be grouped by cell (all pairs of
/// a cell contiguous); call `finalize` after filling.
struct RelaxedProblem {
  int num_sats = 0;
  int num_cells = 0;
  double frame_cap = 0.0;
  double budget = 0.0;
  double frame_fraction = 1.0;  // T_F / T
  std::vector<double> users;    // per cell, > 0
  std::vector<int> pair_sat;
  std::vector<int> pair_cell;
  std::vector<double> pair_gain;    // bit/s, > 0
  std::vector<double> pair_weight;  // >= 0

  // filled by finalize()
  std::vector<int> cell_begin;  // CSR over pairs, size num_cells + 1
  std::vector<int> sat_begin;   // CSR over sat_pairs, size num_sats + 1
  std::vector<int> sat_pairs;

  std::size_t num_pairs() const { return pair_sat.size(); }
  /// Validates shapes and builds the CSR indexes. Throws DomainError.
  void finalize();
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double step_size = 0.0;
};

struct RelaxedAllocation {
  std::vector<double> values;  // per pair
  double objective = 0.0;      // natural log
  double kkt_residual = 0.0;
  int steps = 0;
  bool converged = false;
  /// True if some cell's rate sat on the log(0) guard at the returned point.
  bool rate_clamp_active = false;
  std::vector<IterationRecord> history;
};

constexpr double kRateFloor = 1e-12;  // bit/s, log(0) guard

/// Objective value (natural log) at x. Rates are floored at kRateFloor.
double objective(const RelaxedProblem& p, std::span<const double> x);

/// Gradient of `objective`; returns false if some cell has zero rate (the
/// gradient is then unbounded and `grad` is left partially filled).
bool gradient(const RelaxedProblem& p, std::span<const double> x, std::span<double> grad);

/// First-order optimality violation of a feasible x given the objective
/// gradient: for each satellite, the largest violation of stationarity (free
/// coordinates), of the one-sided sign conditions (coordinates at 0 or at the
/// cap) and of multiplier complementarity, minimised over the satellite's
/// budget multiplier. Max over satellites.
double kkt_residual(const RelaxedProblem& p, std::span<const double> x, std::span<const double> grad);

/// Weighted projection of y onto {0 <= z <= cap, sum z <= budget}: minimises
/// sum (z_i - y_i)^2 / metric_i. Unit metric gives the Euclidean projection.
/// Exact: safeguarded Newton on the piecewise-linear budget equation.
std::vector<double> project_box_budget(std::span<const double> y, double cap, double budget,
                                       std::span<const double> metric = {});

/// Mean marginal utility of a frame when every satellite is fully used:
/// sum U / sum_s min(budget, cap * pairs of s). Gradients and KKT residuals
/// are on this scale.
double price_scale(const RelaxedProblem& p);

constexpr double kDefaultRelativeTolerance = 1e-4;

/// Tolerance used when SolverConfig::pg_tolerance is unset:
/// kDefaultRelativeTolerance * price_scale(p).
double default_tolerance(const RelaxedProblem& p);

/// Projected-gradient ascent with a diagonal (Newton-like) metric. The
/// backtracking rule adds Nesterov momentum with restarts; after a warm-up
/// on all pairs the ascent runs on a working set that the full KKT check
/// keeps honest. Starts from `warm_start` if given (cells it leaves at zero
/// rate get one frame per pair), else from an even split of every
/// satellite's budget.
RelaxedAllocation solve_relaxed_global(const RelaxedProblem& p, const SolverConfig& cfg,
                                       std::optional<std::span<const double>> warm_start = {});

struct LocalSolution {
  std::vector<double> values;
  double objective = 0.0;
};

/// Exact optimum of the single-satellite problem
///   max sum_c U_c log(T_F/(T U_c) x_c rho_c (1 - h_c))  s.t. 0 <= x_c <= N_T, sum x_c <= N_T N_B
/// by capped water-filling: x_c = min(N_T, U_c / lambda). Throws DomainError
/// when a cell has non-positive users or rate.
LocalSolution solve_local(std::span<const double> users, std::span<const double> rates,
                          std::span<const double> penalties, const TimingConfig& timing);

/// Capped water-filling core: x_c = min(cap, U_c / lambda), sum = min(budget, n cap).
std::vector<double> water_fill(std::span<const double> users, double cap, double budget);

}  // namespace leo
