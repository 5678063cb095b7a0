#pragma once

#include <utility>
#include <vector>

#include "islq/lmi.hpp"
#include "islq/types.hpp"

// Backward integration of the generalized differential Riccati equation with
// pseudo-inverse constraints, its shifted (singular) variant, and the
// stationary solve that drives the shifted equation to its limit.
namespace islq::riccati {

struct IntegrationTols {
  /// Slack for the semidefiniteness condition min_eig(R + D'PD) >= -psd_tol.
  double psd_tol = 1e-8;
  /// Slack for the range condition |(I - Omega Omega^+)(B'P + D'PC)| <= reg_tol.
  double reg_tol = 1e-7;
  double rank_tol = matops::kAutoRankTol;
};

struct ConstraintDiag {
  double omega_min_eig = 0.0;
  double regularity_defect = 0.0;
};

/// Time-gridded backward solution. The grid is strictly decreasing from the
/// terminal time down to t_min; entry k holds P, the feedback gain, and the
/// constraint diagnostics at grid[k].
struct GdreSolution {
  std::vector<double> grid;
  std::vector<SymMatrix> p_of_t;
  std::vector<Matrix> k_of_t;
  std::vector<ConstraintDiag> constraint_log;

  double terminal_time() const { return grid.front(); }
  double t_min() const { return grid.back(); }
};

/// Backward derivative dP/dt = -(A'P + PA + C'PC + Q
///   - (PB + C'PD)(R + D'PD)^+(B'P + D'PC)), symmetrized, plus the constraint
/// diagnostics at this P.
std::pair<SymMatrix, ConstraintDiag> gdre_rhs(const SystemModel& model,
                                              const CostWeights& weights,
                                              const SymMatrix& p,
                                              double rank_tol = matops::kAutoRankTol);

/// Classical fixed-step RK4 backward integration from P(T) = terminal over
/// [T - horizon, T] (the grid is written with T = horizon so t_min = 0).
/// Every accepted step must satisfy both constraints within tols, else
/// GdreBreakdown reports the time and the violation.
GdreSolution integrate_gdre(const SystemModel& model, const CostWeights& weights,
                            const SymMatrix& terminal, double horizon, double step,
                            const IntegrationTols& tols = {});

/// Stationary feedback gain -(R + D'PD)^+(B'P + D'PC).
Matrix finite_gain(const SystemModel& model, const CostWeights& weights,
                   const SymMatrix& p, double rank_tol = matops::kAutoRankTol);

/// Backward integration of the shifted equation in Z from Z(T,T) = 0. Each
/// step additionally requires Z >= -psd_tol; the shifted weights must come
/// from a set member or the run is expected to break down (SdreBreakdown).
GdreSolution integrate_sdre(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                            double horizon, double step,
                            const IntegrationTols& tols = {});

struct GareResidual {
  /// Max-abs-entry norm of the stationary equation at P.
  double res = 0.0;
  double reg_defect = 0.0;
  double omega_min = 0.0;
};

GareResidual gare_residual(const SystemModel& model, const CostWeights& weights,
                           const SymMatrix& p, double rank_tol = matops::kAutoRankTol);

struct GareSolution {
  SymMatrix p_bar;
  Matrix k_gain;  // m x n
  SymMatrix z_bar;
  lmi::LmiCandidate p_hat_used;
  double residual = 0.0;
  double regularity_defect = 0.0;
  double omega_min_eig = 0.0;
  long iterations = 0;  // RK4 steps taken
  double horizon = 0.0; // backward horizon at convergence
};

struct GareSolveOptions {
  /// Trailing-window criterion: stop once |Z(tau) - Z(tau - 1)|_max < conv_tol.
  double conv_tol = 1e-9;
  double max_horizon = 6400.0;
  double step = 1e-3;
  IntegrationTols tols{};
};

/// Drives the shifted equation from the candidate until the trailing-window
/// difference falls below conv_tol, then assembles p_bar = z_bar + p_hat with
/// the stationary gain and residual diagnostics. Throws NonConvergence when
/// the budget runs out (for a nonempty candidate set this signals that
/// mean-square stabilizability fails); requires membership of the candidate.
GareSolution solve_gare(const SystemModel& model, const CostWeights& weights,
                        const lmi::LmiCandidate& cand,
                        const GareSolveOptions& opts = {});

struct ClosedLoopData {
  Matrix a_cl;
  Matrix c_cl;
  SymMatrix q_cl;
  Matrix k_shift;  // m x n
};

/// Closed-loop rewrite at a stationary shifted solution z_bar:
///   k_shift = -(r_shift + D'ZD)^+(B'Z + D'ZC + l_shift'),
///   a_cl = A + B k_shift, c_cl = C + D k_shift,
///   q_cl = q_shift + l_shift k + k' l_shift' + k' r_shift k.
/// Verifies a_cl'Z + Z a_cl + c_cl'Z c_cl + q_cl = 0 and q_cl >= -tol to
/// `tol`, throwing Inconsistency otherwise (z_bar was not a solution).
ClosedLoopData closedloop_data(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                               const SymMatrix& z_bar,
                               double rank_tol = matops::kAutoRankTol,
                               double tol = 1e-6);

}  // namespace islq::riccati
