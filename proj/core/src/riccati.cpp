#include "islq/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace islq::riccati {

namespace {

// Both Riccati equations here are the same operator with different weights:
// the unshifted one uses (Q, 0, R), the shifted one (q_shift, l_shift,
// r_shift). Everything below works on the generalized triple.
struct RiccatiOperator {
  const Matrix& A;
  const Matrix& B;
  const Matrix& C;
  const Matrix& D;
  Matrix Qe;  // n x n
  Matrix Le;  // n x m
  Matrix Re;  // m x m
  double rank_tol;

  struct Eval {
    Matrix drift;  // A'P + PA + C'PC + Qe - (PB + C'PD + Le) Om^+ (...)'
    double omega_min_eig;
    double regularity_defect;
    Matrix gain;  // -Om^+ (B'P + D'PC + Le'), filled only when requested
  };

  // Omega is symmetric, so its pseudo-inverse, rank projector, and minimum
  // eigenvalue all come from one spectral decomposition (identical to the
  // SVD route up to roundoff, and this sits in the per-step hot path).
  struct OmegaDecomp {
    Matrix pinv;
    Matrix range_proj;  // Omega Omega^+
    double min_eig;
  };

  OmegaDecomp decompose_omega(const Matrix& p, bool want_proj) const {
    Matrix omega = Re + D.transpose() * p * D;
    omega = 0.5 * (omega + omega.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(omega);
    if (es.info() != Eigen::Success) {
      throw NumericalFailure("riccati: eigendecomposition of the control weight failed",
                             omega);
    }
    const Vector& lam = es.eigenvalues();
    const auto m = lam.size();
    const double sigma_max = std::max(std::abs(lam(0)), std::abs(lam(m - 1)));
    const double tol = rank_tol == matops::kAutoRankTol
                           ? matops::default_rank_tol(m, m, sigma_max)
                           : rank_tol;
    Vector inv = Vector::Zero(m);
    Vector proj = Vector::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(lam(i)) > tol) {
        inv(i) = 1.0 / lam(i);
        proj(i) = 1.0;
      }
    }
    OmegaDecomp out;
    out.pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    if (want_proj) {
      out.range_proj =
          es.eigenvectors() * proj.asDiagonal() * es.eigenvectors().transpose();
    }
    out.min_eig = lam(0);
    return out;
  }

  Matrix drift_at(const Matrix& p, const Matrix& omega_pinv) const {
    const Matrix lift = p * B + C.transpose() * p * D + Le;  // n x m
    Matrix drift = A.transpose() * p + p * A + C.transpose() * p * C + Qe -
                   lift * omega_pinv * lift.transpose();
    return 0.5 * (drift + drift.transpose());
  }

  // RK stage evaluation: the drift alone.
  Matrix drift_only(const Matrix& p) const {
    return drift_at(p, decompose_omega(p, false).pinv);
  }

  // Accepted-point evaluation: drift plus constraint diagnostics.
  Eval operator()(const Matrix& p, bool want_gain) const {
    const OmegaDecomp om = decompose_omega(p, true);
    const Matrix mrow = (p * B + C.transpose() * p * D + Le).transpose();  // m x n

    Eval out;
    out.drift = drift_at(p, om.pinv);
    out.omega_min_eig = om.min_eig;
    out.regularity_defect =
        ((om.range_proj - Matrix::Identity(mrow.rows(), mrow.rows())) * mrow)
            .cwiseAbs()
            .maxCoeff();
    if (want_gain) out.gain = -(om.pinv * mrow);
    return out;
  }
};

RiccatiOperator make_unshifted(const SystemModel& model, const CostWeights& weights,
                               double rank_tol) {
  check_dims(model, weights);
  return RiccatiOperator{model.A,
                         model.B,
                         model.C,
                         model.D,
                         weights.Q.mat(),
                         Matrix::Zero(model.state_dim(), model.input_dim()),
                         weights.R.mat(),
                         rank_tol};
}

RiccatiOperator make_shifted(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                             double rank_tol) {
  if (shifted.q_shift.dim() != model.state_dim() ||
      shifted.r_shift.dim() != model.input_dim() ||
      shifted.l_shift.rows() != model.state_dim() ||
      shifted.l_shift.cols() != model.input_dim()) {
    throw ContractViolation("shifted weights do not match the model's dimensions");
  }
  return RiccatiOperator{model.A,          model.B,
                         model.C,          model.D,
                         shifted.q_shift.mat(), shifted.l_shift,
                         shifted.r_shift.mat(), rank_tol};
}

// One classical RK4 step of dP/dtau = drift(P), tau the backward coordinate.
// Reuses the already-evaluated drift at P as stage one.
Matrix rk4_step(const RiccatiOperator& op, const Matrix& p, const Matrix& k1, double h) {
  const Matrix k2 = op.drift_only(p + (0.5 * h) * k1);
  const Matrix k3 = op.drift_only(p + (0.5 * h) * k2);
  const Matrix k4 = op.drift_only(p + h * k3);
  Matrix next = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return 0.5 * (next + next.transpose());
}

enum class Flavor { kGdre, kSdre };

[[noreturn]] void throw_breakdown(Flavor flavor, const std::string& what, double t,
                                  double omega_min, double reg_defect) {
  if (flavor == Flavor::kGdre) throw GdreBreakdown(what, t, omega_min, reg_defect);
  throw SdreBreakdown(what, t, omega_min, reg_defect);
}

void check_constraints(Flavor flavor, const RiccatiOperator::Eval& eval, const Matrix& p,
                       double t, const IntegrationTols& tols) {
  if (!eval.drift.allFinite() || !p.allFinite()) {
    throw NumericalFailure("riccati integration produced non-finite values at t=" +
                               std::to_string(t),
                           p);
  }
  if (eval.omega_min_eig < -tols.psd_tol) {
    throw_breakdown(flavor,
                    "semidefiniteness condition failed at t=" + std::to_string(t) +
                        ": min eig " + std::to_string(eval.omega_min_eig),
                    t, eval.omega_min_eig, eval.regularity_defect);
  }
  if (eval.regularity_defect > tols.reg_tol) {
    throw_breakdown(flavor,
                    "regularity condition failed at t=" + std::to_string(t) +
                        ": defect " + std::to_string(eval.regularity_defect),
                    t, eval.omega_min_eig, eval.regularity_defect);
  }
  if (flavor == Flavor::kSdre && matops::min_eig_sym(p) < -tols.psd_tol) {
    throw SdreBreakdown("shifted solution lost positive semidefiniteness at t=" +
                            std::to_string(t),
                        t, eval.omega_min_eig, eval.regularity_defect);
  }
}

GdreSolution integrate_backward(const RiccatiOperator& op, Flavor flavor,
                                const Matrix& terminal, double horizon, double step,
                                const IntegrationTols& tols) {
  if (step <= 0.0) throw ContractViolation("integrate: step must be > 0");
  if (horizon < step) throw ContractViolation("integrate: horizon must be >= step");

  const long nsteps = std::lround(horizon / step);
  GdreSolution sol;
  sol.grid.reserve(nsteps + 1);
  sol.p_of_t.reserve(nsteps + 1);
  sol.k_of_t.reserve(nsteps + 1);
  sol.constraint_log.reserve(nsteps + 1);

  Matrix p = 0.5 * (terminal + terminal.transpose());
  RiccatiOperator::Eval eval = op(p, true);

  auto record = [&](double t) {
    check_constraints(flavor, eval, p, t, tols);
    sol.grid.push_back(t);
    sol.p_of_t.emplace_back(p);
    sol.k_of_t.push_back(eval.gain);
    sol.constraint_log.push_back({eval.omega_min_eig, eval.regularity_defect});
  };

  record(horizon);  // grid written with T = horizon, so t_min lands at 0
  for (long k = 1; k <= nsteps; ++k) {
    p = rk4_step(op, p, eval.drift, step);
    eval = op(p, true);
    record(horizon - static_cast<double>(k) * step);
  }
  return sol;
}

}  // namespace

std::pair<SymMatrix, ConstraintDiag> gdre_rhs(const SystemModel& model,
                                              const CostWeights& weights,
                                              const SymMatrix& p, double rank_tol) {
  const auto op = make_unshifted(model, weights, rank_tol);
  const auto eval = op(p.mat(), false);
  return {SymMatrix(-eval.drift),
          ConstraintDiag{eval.omega_min_eig, eval.regularity_defect}};
}

GdreSolution integrate_gdre(const SystemModel& model, const CostWeights& weights,
                            const SymMatrix& terminal, double horizon, double step,
                            const IntegrationTols& tols) {
  if (terminal.dim() != model.state_dim()) {
    throw ContractViolation("integrate_gdre: terminal must be n x n");
  }
  const auto op = make_unshifted(model, weights, tols.rank_tol);
  return integrate_backward(op, Flavor::kGdre, terminal.mat(), horizon, step, tols);
}

GdreSolution integrate_sdre(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                            double horizon, double step, const IntegrationTols& tols) {
  const auto op = make_shifted(model, shifted, tols.rank_tol);
  const Matrix zero = Matrix::Zero(model.state_dim(), model.state_dim());
  return integrate_backward(op, Flavor::kSdre, zero, horizon, step, tols);
}

Matrix finite_gain(const SystemModel& model, const CostWeights& weights,
                   const SymMatrix& p, double rank_tol) {
  if (p.dim() != model.state_dim()) throw ContractViolation("finite_gain: p must be n x n");
  const auto op = make_unshifted(model, weights, rank_tol);
  return op(p.mat(), true).gain;
}

GareResidual gare_residual(const SystemModel& model, const CostWeights& weights,
                           const SymMatrix& p, double rank_tol) {
  if (p.dim() != model.state_dim()) {
    throw ContractViolation("gare_residual: p must be n x n");
  }
  const auto op = make_unshifted(model, weights, rank_tol);
  const auto eval = op(p.mat(), false);
  return GareResidual{eval.drift.cwiseAbs().maxCoeff(), eval.regularity_defect,
                      eval.omega_min_eig};
}

GareSolution solve_gare(const SystemModel& model, const CostWeights& weights,
                        const lmi::LmiCandidate& cand, const GareSolveOptions& opts) {
  if (opts.step <= 0.0) throw ContractViolation("solve_gare: step must be > 0");
  if (opts.conv_tol <= 0.0) throw ContractViolation("solve_gare: conv_tol must be > 0");

  const auto rep = lmi::membership(model, weights, cand, opts.tols.psd_tol,
                                   opts.tols.rank_tol);
  if (!rep.member) {
    throw ContractViolation(
        "solve_gare: candidate fails membership (block min eig " +
        std::to_string(rep.block_min_eig) + ", kernel violation " +
        std::to_string(rep.kernel_violation) + ")");
  }

  const auto shifted = lmi::shifted_weights(model, weights, cand);
  const auto op = make_shifted(model, shifted, opts.tols.rank_tol);
  const auto n = model.state_dim();
  const double h = opts.step;
  const long steps_per_unit = std::max<long>(1, std::lround(1.0 / h));

  Matrix z = Matrix::Zero(n, n);
  RiccatiOperator::Eval eval = op(z, false);
  check_constraints(Flavor::kSdre, eval, z, 0.0, opts.tols);

  Matrix z_prev = z;
  double tau = 0.0;
  long iters = 0;
  double window_delta = std::numeric_limits<double>::infinity();
  bool converged = false;

  while (tau < opts.max_horizon - 0.5) {
    for (long s = 0; s < steps_per_unit; ++s) {
      z = rk4_step(op, z, eval.drift, h);
      eval = op(z, false);
      ++iters;
      const double t = tau + static_cast<double>(s + 1) * h;
      check_constraints(Flavor::kSdre, eval, z, t, opts.tols);
      if (z.cwiseAbs().maxCoeff() > 1e10) {
        // The shifted solution grows monotonically, so once it has blown past
        // any plausible stationary value it can never come back down.
        throw NonConvergence(
            "shifted Riccati solution diverged (mean-square stabilizability "
            "likely fails)",
            t, z.cwiseAbs().maxCoeff());
      }
    }
    tau += 1.0;
    window_delta = (z - z_prev).cwiseAbs().maxCoeff();
    if (window_delta < opts.conv_tol) {
      converged = true;
      break;
    }
    z_prev = z;
  }

  if (!converged) {
    throw NonConvergence("stationary solve did not converge within horizon " +
                             std::to_string(opts.max_horizon) +
                             " (trailing delta " + std::to_string(window_delta) + ")",
                         tau, window_delta);
  }

  GareSolution sol;
  sol.z_bar = SymMatrix(z);
  sol.p_bar = SymMatrix(z + cand.p_hat.mat());
  sol.p_hat_used = cand;
  sol.k_gain = finite_gain(model, weights, sol.p_bar, opts.tols.rank_tol);
  const auto res = gare_residual(model, weights, sol.p_bar, opts.tols.rank_tol);
  sol.residual = res.res;
  sol.regularity_defect = res.reg_defect;
  sol.omega_min_eig = res.omega_min;
  sol.iterations = iters;
  sol.horizon = tau;
  return sol;
}

ClosedLoopData closedloop_data(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                               const SymMatrix& z_bar, double rank_tol, double tol) {
  if (z_bar.dim() != model.state_dim()) {
    throw ContractViolation("closedloop_data: z_bar must be n x n");
  }
  const Matrix& z = z_bar.mat();
  Matrix omega = shifted.r_shift.mat() + model.D.transpose() * z * model.D;
  omega = 0.5 * (omega + omega.transpose());
  const Matrix mrow = model.B.transpose() * z + model.D.transpose() * z * model.C +
                      shifted.l_shift.transpose();
  const Matrix k = -(matops::pinv(omega, rank_tol) * mrow);

  ClosedLoopData out;
  out.k_shift = k;
  out.a_cl = model.A + model.B * k;
  out.c_cl = model.C + model.D * k;
  Matrix q_cl = shifted.q_shift.mat() + shifted.l_shift * k +
                k.transpose() * shifted.l_shift.transpose() +
                k.transpose() * shifted.r_shift.mat() * k;
  out.q_cl = SymMatrix(q_cl);

  const Matrix rewrite = out.a_cl.transpose() * z + z * out.a_cl +
                         out.c_cl.transpose() * z * out.c_cl + out.q_cl.mat();
  const double rewrite_defect = rewrite.cwiseAbs().maxCoeff();
  if (rewrite_defect > tol) {
    throw Inconsistency("closedloop_data: z_bar does not solve the shifted "
                        "stationary equation (rewrite defect " +
                        std::to_string(rewrite_defect) + ")");
  }
  const double q_cl_min = matops::min_eig_sym(out.q_cl.mat());
  if (q_cl_min < -tol) {
    throw Inconsistency("closedloop_data: closed-loop weight lost positive "
                        "semidefiniteness (min eig " +
                        std::to_string(q_cl_min) + ")");
  }
  return out;
}

}  // namespace islq::riccati
