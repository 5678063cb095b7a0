#pragma once

#include <cstdint>
#include <vector>

#include "islq/riccati.hpp"
#include "islq/types.hpp"

// Seeded Euler-Maruyama Monte Carlo of the open/closed loop, second-moment
// and cost estimation, and the comparisons against the Riccati value
// identities. Reproducible by construction: every path draws from its own
// counter-based stream derived from (seed, path index), and the statistics
// are reduced in a fixed order, so results do not depend on thread count.
namespace islq::sim {

struct SimConfig {
  double dt = 1e-3;
  double t_end = 60.0;
  long paths = 2000;
  std::uint64_t seed = 1;
  Vector x0;
};

struct TrajectoryStats {
  std::vector<double> grid;
  std::vector<double> mean_sq;       // E|x(t)|^2 estimates
  std::vector<double> mean_sq_se;    // standard errors
  std::vector<double> cost_rate_mean;  // E[x'Qx + u'Ru] estimates per stamp
  std::vector<double> control_sample;  // first input channel of path 0
  double cost_estimate = 0.0;
  double cost_se = 0.0;
};

/// Constant gain or a time-indexed gain table (piecewise over a uniform grid).
class GainSchedule {
 public:
  static GainSchedule constant(Matrix k);
  /// Gain table read off a backward Riccati solution's grid.
  static GainSchedule from_gdre(const riccati::GdreSolution& gdre);

  const Matrix& at(double t) const;
  bool is_constant() const noexcept { return table_.empty(); }
  bool covers(double t_begin, double t_end) const;
  Eigen::Index rows() const { return k0_.rows(); }
  Eigen::Index cols() const { return k0_.cols(); }

 private:
  Matrix k0_;                  // constant gain, or fallback (unused for tables)
  std::vector<Matrix> table_;  // increasing time order
  double t0_ = 0.0;
  double dt_ = 0.0;
};

/// Euler-Maruyama closed-loop simulation
///   x_{k+1} = x_k + (A + BK)x_k dt + (C + DK)x_k sqrt(dt) xi_k
/// with per-path costs sum (x'Qx + u'Ru) dt. Throws Divergence with the first
/// blow-up time once any path's norm exceeds 1e12 (expected on unstable loops).
TrajectoryStats simulate_closedloop(const SystemModel& model, const CostWeights& weights,
                                    const GainSchedule& gain, const SimConfig& cfg);

struct CostComparison {
  TrajectoryStats stats;
  double cost_estimate = 0.0;
  double cost_se = 0.0;
  double value_target = 0.0;  // x0' P x0
  /// Truncation tail estimate |integrand(t_end)| / decay-rate, with the rate
  /// fitted on the last decade of mean_sq.
  double tail_bound = 0.0;
  double fitted_decay_rate = 0.0;
};

/// Infinite-horizon cost estimate truncated at cfg.t_end versus the quadratic
/// value x0' p x0. Requires a mean-square stable closed loop (Divergence
/// otherwise, so the truncation converges).
CostComparison estimate_cost_vs_value(const SystemModel& model, const CostWeights& weights,
                                      const Matrix& gain, const SymMatrix& p_matrix,
                                      const SimConfig& cfg);

struct FiniteHorizonComparison {
  TrajectoryStats stats;
  double cost_estimate = 0.0;  // running + terminal x(T)' P(T) x(T)
  double cost_se = 0.0;
  double value_target = 0.0;   // x0' P(0) x0
};

/// Simulates with the time-varying optimal gain table of a backward solution
/// whose grid must cover [0, cfg.t_end], and compares the Monte Carlo cost
/// (running plus terminal) against the value read off P at t = 0.
FiniteHorizonComparison simulate_finite_horizon(const SystemModel& model,
                                                const CostWeights& weights,
                                                const riccati::GdreSolution& gdre,
                                                const SimConfig& cfg);

/// Counter-based per-path random stream: a splitmix64 sequence keyed by
/// (seed, path index), shaped into standard normals by Box-Muller. Identical
/// output for a given key on every platform and thread layout.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path_index);
  double normal();

 private:
  std::uint64_t next();
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace islq::sim
