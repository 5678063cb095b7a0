#pragma once

#include <cstdint>

#include "islq/matops.hpp"
#include "islq/types.hpp"

// The candidate set behind the stationary solve: symmetric P for which the
// structured (n+m) x (n+m) block matrix is PSD and the kernel of the shifted
// control weight sits inside Ker B intersect Ker D. Membership makes the
// shifted problem definite, which is what the stationary iteration needs.
namespace islq::lmi {

struct LmiCandidate {
  SymMatrix p_hat;
};

/// Weights of the shifted problem built from a candidate:
///   q_shift = A'P + PA + C'PC + Q,  l_shift = PB + C'PD,  r_shift = R + D'PD.
struct ShiftedWeights {
  SymMatrix q_shift;
  Matrix l_shift;  // n x m
  SymMatrix r_shift;
};

struct MembershipReport {
  bool lmi_psd = false;
  bool kernel_ok = false;
  bool member = false;
  double block_min_eig = 0.0;
  /// Largest |B v| or |D v| over kernel basis vectors v of r_shift (0 when
  /// the kernel is empty).
  double kernel_violation = 0.0;
};

/// The structured block [[A'P+PA+C'PC+Q, PB+C'PD], [(PB+C'PD)', R+D'PD]].
SymMatrix lmi_block(const SystemModel& model, const CostWeights& weights,
                    const LmiCandidate& cand);

/// Membership test; infeasibility is a report outcome, not an error.
MembershipReport membership(const SystemModel& model, const CostWeights& weights,
                            const LmiCandidate& cand, double tol,
                            double rank_tol = matops::kAutoRankTol);

ShiftedWeights shifted_weights(const SystemModel& model, const CostWeights& weights,
                               const LmiCandidate& cand);

struct FeasibilityOptions {
  int max_iters = 400;
  double step = 1.0;
  /// PSD slack for membership checks.
  double tol = 1e-8;
  /// Stop ascending once the block's min eigenvalue clears this margin; a
  /// strictly interior candidate keeps the downstream pseudo-inverses away
  /// from rank decisions.
  double accept_margin = 1e-4;
  /// Seed for the random restarts taken when the ascent stalls.
  std::uint64_t seed = 1;
  double rank_tol = matops::kAutoRankTol;
};

struct FeasibilityResult {
  bool feasible = false;
  LmiCandidate candidate;
  MembershipReport report;
  int iterations = 0;
  double best_min_eig = 0.0;
};

/// Search for a member by projected subgradient ascent on the block's minimum
/// eigenvalue (the subgradient at eigenvector v = (u; w) pulls back to
/// A uu' + uu'A' + B wu' + uw'B' + (Cu + Dw)(Cu + Dw)'). Starts from zero;
/// restarts from seeded random perturbations when stalled. Returns the best
/// candidate either way; `feasible` says whether it passed membership.
FeasibilityResult find_feasible(const SystemModel& model, const CostWeights& weights,
                                const FeasibilityOptions& opts = {});

}  // namespace islq::lmi
