#include "islq/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <thread>

#include <Eigen/Dense>

namespace islq::sim {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr double kBlowUpNorm = 1e12;
constexpr double kBlowUpSq = kBlowUpNorm * kBlowUpNorm;

// Paths are split into a fixed number of contiguous blocks. Each block's
// partial sums are computed sequentially and the blocks are combined in index
// order, so the reduction is bit-identical for any thread count.
constexpr int kNumBlocks = 16;

struct BlockAccum {
  std::vector<double> sum_sq;
  std::vector<double> sum_sq2;
  std::vector<double> sum_rate;
  std::optional<double> blow_up_time;
};

void validate_config(const SystemModel& model, const SimConfig& cfg) {
  if (cfg.dt <= 0.0) throw ContractViolation("SimConfig: dt must be > 0");
  if (cfg.t_end < cfg.dt) throw ContractViolation("SimConfig: t_end must be >= dt");
  if (cfg.paths < 1) throw ContractViolation("SimConfig: paths must be >= 1");
  if (cfg.x0.size() != model.state_dim()) {
    throw ContractViolation("SimConfig: x0 must have length n");
  }
}

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index)
    : state_(mix64(seed ^ mix64(path_index + 0x9E3779B97F4A7C15ULL))) {}

std::uint64_t PathRng::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double PathRng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
  const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;          // [0,1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  have_cached_ = true;
  return radius * std::cos(angle);
}

GainSchedule GainSchedule::constant(Matrix k) {
  GainSchedule g;
  g.k0_ = std::move(k);
  return g;
}

GainSchedule GainSchedule::from_gdre(const riccati::GdreSolution& gdre) {
  if (gdre.grid.size() < 2) {
    throw ContractViolation("GainSchedule: gdre solution needs at least two stamps");
  }
  GainSchedule g;
  const auto count = gdre.grid.size();
  g.t0_ = gdre.grid.back();
  g.dt_ = (gdre.grid.front() - gdre.grid.back()) / static_cast<double>(count - 1);
  g.table_.assign(gdre.k_of_t.rbegin(), gdre.k_of_t.rend());
  g.k0_ = g.table_.front();
  return g;
}

const Matrix& GainSchedule::at(double t) const {
  if (table_.empty()) return k0_;
  const auto idx = std::llround((t - t0_) / dt_);
  const auto clamped = std::clamp<long long>(idx, 0, static_cast<long long>(table_.size()) - 1);
  return table_[static_cast<std::size_t>(clamped)];
}

bool GainSchedule::covers(double t_begin, double t_end) const {
  if (table_.empty()) return true;
  const double t_last = t0_ + dt_ * static_cast<double>(table_.size() - 1);
  const double slack = 0.5 * dt_;
  return t0_ <= t_begin + slack && t_last >= t_end - slack;
}

namespace {

struct SimProblem {
  const SystemModel& model;
  const CostWeights& weights;
  const GainSchedule& gain;
  const SimConfig& cfg;
  const Matrix* terminal_weight;  // optional terminal x'Tx added to the cost
  long n_steps;
};

// Simulates paths [first, last) into the block accumulator. Path 0 also
// records the control sample.
void run_block(const SimProblem& prob, long first, long last, BlockAccum& acc,
               std::vector<double>& path_costs, std::vector<double>* control_sample) {
  const auto& model = prob.model;
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  const double dt = prob.cfg.dt;
  const double sq_dt = std::sqrt(dt);
  const long n_steps = prob.n_steps;

  const bool constant_gain = prob.gain.is_constant();
  Matrix a_cl, c_cl, w_cl;
  const Matrix& q = prob.weights.Q.mat();
  const Matrix& r = prob.weights.R.mat();
  if (constant_gain) {
    const Matrix& k = prob.gain.at(0.0);
    a_cl = model.A + model.B * k;
    c_cl = model.C + model.D * k;
    w_cl = q + k.transpose() * r * k;  // x'Qx + u'Ru collapses to x'Wx
  }

  Vector x(n), ax(n), cx(n), qx(n), u(m), ru(m);
  for (long p = first; p < last; ++p) {
    PathRng rng(prob.cfg.seed, static_cast<std::uint64_t>(p));
    x = prob.cfg.x0;
    double cost = 0.0;
    bool alive = true;

    for (long k = 0; k <= n_steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double sq = x.squaredNorm();
      acc.sum_sq[k] += sq;
      acc.sum_sq2[k] += sq * sq;

      double integrand;
      if (constant_gain) {
        qx.noalias() = w_cl * x;
        integrand = x.dot(qx);
      } else {
        u.noalias() = prob.gain.at(t) * x;
        qx.noalias() = q * x;
        ru.noalias() = r * u;
        integrand = x.dot(qx) + u.dot(ru);
      }
      acc.sum_rate[k] += integrand;

      if (p == 0 && control_sample != nullptr) {
        if (constant_gain) u.noalias() = prob.gain.at(t) * x;
        (*control_sample)[k] = u(0);
      }

      if (sq > kBlowUpSq) {
        if (!acc.blow_up_time || t < *acc.blow_up_time) acc.blow_up_time = t;
        alive = false;
        break;
      }
      if (k == n_steps) break;

      cost += integrand * dt;
      const double xi = rng.normal();
      if (constant_gain) {
        ax.noalias() = a_cl * x;
        cx.noalias() = c_cl * x;
      } else {
        ax.noalias() = model.A * x;
        ax.noalias() += model.B * u;
        cx.noalias() = model.C * x;
        cx.noalias() += model.D * u;
      }
      x += dt * ax;
      x += (sq_dt * xi) * cx;
    }

    if (alive && prob.terminal_weight != nullptr) {
      qx.noalias() = (*prob.terminal_weight) * x;
      cost += x.dot(qx);
    }
    path_costs[static_cast<std::size_t>(p)] = cost;
  }
}

TrajectoryStats simulate_impl(const SystemModel& model, const CostWeights& weights,
                              const GainSchedule& gain, const SimConfig& cfg,
                              const Matrix* terminal_weight) {
  validate_config(model, cfg);
  check_dims(model, weights);
  if (gain.rows() != model.input_dim() || gain.cols() != model.state_dim()) {
    throw ContractViolation("simulate: gain must be m x n");
  }
  if (!gain.covers(0.0, cfg.t_end)) {
    throw ContractViolation("simulate: gain table does not cover [0, t_end]");
  }

  const long n_steps = std::lround(cfg.t_end / cfg.dt);
  SimProblem prob{model, weights, gain, cfg, terminal_weight, n_steps};

  std::vector<BlockAccum> blocks(kNumBlocks);
  for (auto& b : blocks) {
    b.sum_sq.assign(n_steps + 1, 0.0);
    b.sum_sq2.assign(n_steps + 1, 0.0);
    b.sum_rate.assign(n_steps + 1, 0.0);
  }
  std::vector<double> path_costs(static_cast<std::size_t>(cfg.paths), 0.0);
  std::vector<double> control_sample(n_steps + 1, 0.0);

  auto block_range = [&](int b) {
    const long first = cfg.paths * b / kNumBlocks;
    const long last = cfg.paths * (b + 1) / kNumBlocks;
    return std::make_pair(first, last);
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      cfg.paths >= 64 ? std::min<unsigned>(hw, kNumBlocks) : 1u;

  if (n_threads == 1) {
    for (int b = 0; b < kNumBlocks; ++b) {
      const auto [first, last] = block_range(b);
      if (first < last) {
        run_block(prob, first, last, blocks[b], path_costs,
                  first == 0 ? &control_sample : nullptr);
      }
    }
  } else {
    std::atomic<int> next_block{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&]() {
        for (int b = next_block.fetch_add(1); b < kNumBlocks;
             b = next_block.fetch_add(1)) {
          const auto [first, last] = block_range(b);
          if (first < last) {
            run_block(prob, first, last, blocks[b], path_costs,
                      first == 0 ? &control_sample : nullptr);
          }
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  std::optional<double> blow_up;
  for (const auto& b : blocks) {
    if (b.blow_up_time && (!blow_up || *b.blow_up_time < *blow_up)) {
      blow_up = b.blow_up_time;
    }
  }
  if (blow_up) {
    throw Divergence("simulated state norm exceeded 1e12 at t=" +
                         std::to_string(*blow_up),
                     *blow_up);
  }

  TrajectoryStats stats;
  stats.grid.resize(n_steps + 1);
  stats.mean_sq.resize(n_steps + 1);
  stats.mean_sq_se.resize(n_steps + 1);
  stats.cost_rate_mean.resize(n_steps + 1);
  stats.control_sample = std::move(control_sample);

  const double np = static_cast<double>(cfg.paths);
  for (long k = 0; k <= n_steps; ++k) {
    double s = 0.0, s2 = 0.0, sr = 0.0;
    for (const auto& b : blocks) {
      s += b.sum_sq[k];
      s2 += b.sum_sq2[k];
      sr += b.sum_rate[k];
    }
    const double mean = s / np;
    stats.grid[k] = static_cast<double>(k) * cfg.dt;
    stats.mean_sq[k] = mean;
    stats.cost_rate_mean[k] = sr / np;
    if (cfg.paths > 1) {
      const double var = std::max(0.0, (s2 - np * mean * mean) / (np - 1.0));
      stats.mean_sq_se[k] = std::sqrt(var / np);
    } else {
      stats.mean_sq_se[k] = 0.0;
    }
  }

  double cost_sum = 0.0;
  for (double c : path_costs) cost_sum += c;
  stats.cost_estimate = cost_sum / np;
  if (cfg.paths > 1) {
    double ss = 0.0;
    for (double c : path_costs) {
      const double d = c - stats.cost_estimate;
      ss += d * d;
    }
    stats.cost_se = std::sqrt(ss / (np - 1.0) / np);
  } else {
    stats.cost_se = 0.0;
  }
  return stats;
}

}  // namespace

TrajectoryStats simulate_closedloop(const SystemModel& model, const CostWeights& weights,
                                    const GainSchedule& gain, const SimConfig& cfg) {
  return simulate_impl(model, weights, gain, cfg, nullptr);
}

CostComparison estimate_cost_vs_value(const SystemModel& model, const CostWeights& weights,
                                      const Matrix& gain, const SymMatrix& p_matrix,
                                      const SimConfig& cfg) {
  validate_config(model, cfg);
  if (p_matrix.dim() != model.state_dim()) {
    throw ContractViolation("estimate_cost_vs_value: p_matrix must be n x n");
  }

  const Matrix a_cl = model.A + model.B * gain;
  const Matrix c_cl = model.C + model.D * gain;
  const Matrix lift = matops::moment_lift(a_cl, c_cl);
  Eigen::EigenSolver<Matrix> es(lift, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("estimate_cost_vs_value: eigensolver failed", lift);
  }
  const double abscissa = es.eigenvalues().real().maxCoeff();
  if (abscissa >= 0.0) {
    throw Divergence("estimate_cost_vs_value: closed loop is not mean-square "
                     "stable (abscissa " +
                     std::to_string(abscissa) + "), truncated cost cannot converge");
  }

  CostComparison cmp;
  cmp.stats = simulate_impl(model, weights, GainSchedule::constant(gain), cfg, nullptr);
  cmp.cost_estimate = cmp.stats.cost_estimate;
  cmp.cost_se = cmp.stats.cost_se;
  cmp.value_target = cfg.x0.dot(p_matrix.mat() * cfg.x0);

  // Truncation tail: fit the decay rate on the last decade of mean_sq and
  // extrapolate the final cost rate as that exponential.
  const auto& grid = cmp.stats.grid;
  const auto& msq = cmp.stats.mean_sq;
  const double window = std::min(10.0, 0.5 * cfg.t_end);
  std::size_t begin = 0;
  while (begin < grid.size() && grid[begin] < cfg.t_end - window) ++begin;

  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  long count = 0;
  for (std::size_t k = begin; k < grid.size(); ++k) {
    if (msq[k] <= 0.0) continue;
    const double y = std::log(msq[k]);
    st += grid[k];
    sy += y;
    stt += grid[k] * grid[k];
    sty += grid[k] * y;
    ++count;
  }
  double rate = 0.0;
  if (count >= 2) {
    const double denom = static_cast<double>(count) * stt - st * st;
    if (denom > 0.0) rate = -((static_cast<double>(count) * sty - st * sy) / denom);
  }
  if (rate <= 0.0) rate = -abscissa;  // fall back on the exact moment rate
  cmp.fitted_decay_rate = rate;

  double rate_end = 0.0;
  long rate_count = 0;
  for (std::size_t k = grid.size(); k-- > 0;) {
    if (grid[k] < cfg.t_end - 1.0) break;
    rate_end += cmp.stats.cost_rate_mean[k];
    ++rate_count;
  }
  rate_end /= std::max<long>(1, rate_count);
  cmp.tail_bound = std::abs(rate_end) / rate;
  return cmp;
}

FiniteHorizonComparison simulate_finite_horizon(const SystemModel& model,
                                                const CostWeights& weights,
                                                const riccati::GdreSolution& gdre,
                                                const SimConfig& cfg) {
  validate_config(model, cfg);
  if (gdre.grid.empty()) {
    throw ContractViolation("simulate_finite_horizon: empty gdre solution");
  }
  const GainSchedule gain = GainSchedule::from_gdre(gdre);
  if (!gain.covers(0.0, cfg.t_end)) {
    throw ContractViolation(
        "simulate_finite_horizon: gdre grid does not cover [0, t_end]");
  }

  // P lookup on the (decreasing) grid for the terminal weight and the value.
  const double grid_step = (gdre.grid.front() - gdre.grid.back()) /
                           static_cast<double>(gdre.grid.size() - 1);
  auto p_at = [&](double t) -> const Matrix& {
    const auto idx = std::llround((gdre.grid.front() - t) / grid_step);
    const auto clamped =
        std::clamp<long long>(idx, 0, static_cast<long long>(gdre.grid.size()) - 1);
    return gdre.p_of_t[static_cast<std::size_t>(clamped)].mat();
  };

  const Matrix& terminal = p_at(cfg.t_end);
  FiniteHorizonComparison cmp;
  cmp.stats = simulate_impl(model, weights, gain, cfg, &terminal);
  cmp.cost_estimate = cmp.stats.cost_estimate;
  cmp.cost_se = cmp.stats.cost_se;
  cmp.value_target = cfg.x0.dot(p_at(0.0) * cfg.x0);
  return cmp;
}

}  // namespace islq::sim
