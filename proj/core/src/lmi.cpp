#include "islq/lmi.hpp"

#include <random>

#include <Eigen/Dense>

namespace islq::lmi {

namespace {

void check_candidate_dims(const SystemModel& model, const CostWeights& weights,
                          const LmiCandidate& cand) {
  check_dims(model, weights);
  if (cand.p_hat.dim() != model.state_dim()) {
    throw ContractViolation("LmiCandidate: p_hat must be n x n");
  }
}

}  // namespace

SymMatrix lmi_block(const SystemModel& model, const CostWeights& weights,
                    const LmiCandidate& cand) {
  check_candidate_dims(model, weights, cand);
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  const Matrix& p = cand.p_hat.mat();

  Matrix top_left = model.A.transpose() * p + p * model.A +
                    model.C.transpose() * p * model.C + weights.Q.mat();
  const Matrix top_right = p * model.B + model.C.transpose() * p * model.D;
  Matrix bottom_right = weights.R.mat() + model.D.transpose() * p * model.D;

  Matrix block(n + m, n + m);
  block.topLeftCorner(n, n) = 0.5 * (top_left + top_left.transpose());
  block.topRightCorner(n, m) = top_right;
  block.bottomLeftCorner(m, n) = top_right.transpose();
  block.bottomRightCorner(m, m) = 0.5 * (bottom_right + bottom_right.transpose());
  return SymMatrix(block);
}

MembershipReport membership(const SystemModel& model, const CostWeights& weights,
                            const LmiCandidate& cand, double tol, double rank_tol) {
  const SymMatrix block = lmi_block(model, weights, cand);

  MembershipReport report;
  report.block_min_eig = matops::min_eig_sym(block.mat());
  report.lmi_psd = report.block_min_eig >= -tol;

  const Matrix r_shift =
      weights.R.mat() + model.D.transpose() * cand.p_hat.mat() * model.D;
  const Matrix kernel = matops::kernel_basis(r_shift, rank_tol);
  double violation = 0.0;
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
    violation = std::max(violation, (model.B * kernel.col(j)).norm());
    violation = std::max(violation, (model.D * kernel.col(j)).norm());
  }
  report.kernel_violation = violation;
  report.kernel_ok = violation <= tol;
  report.member = report.lmi_psd && report.kernel_ok;
  return report;
}

ShiftedWeights shifted_weights(const SystemModel& model, const CostWeights& weights,
                               const LmiCandidate& cand) {
  check_candidate_dims(model, weights, cand);
  const Matrix& p = cand.p_hat.mat();
  Matrix q_shift = model.A.transpose() * p + p * model.A +
                   model.C.transpose() * p * model.C + weights.Q.mat();
  Matrix l_shift = p * model.B + model.C.transpose() * p * model.D;
  Matrix r_shift = weights.R.mat() + model.D.transpose() * p * model.D;
  return ShiftedWeights{SymMatrix(q_shift), std::move(l_shift), SymMatrix(r_shift)};
}

FeasibilityResult find_feasible(const SystemModel& model, const CostWeights& weights,
                                const FeasibilityOptions& opts) {
  check_dims(model, weights);
  if (opts.max_iters < 1) throw ContractViolation("find_feasible: max_iters must be >= 1");
  if (opts.step <= 0.0) throw ContractViolation("find_feasible: step must be > 0");

  const auto n = model.state_dim();

  // Min eigenvalue of the block plus the eigenvector needed for the
  // subgradient pull-back.
  auto eval = [&](const Matrix& p_sym) {
    const SymMatrix block = lmi_block(model, weights, LmiCandidate{SymMatrix(p_sym)});
    Eigen::SelfAdjointEigenSolver<Matrix> es(block.mat());
    if (es.info() != Eigen::Success) {
      throw NumericalFailure("find_feasible: eigensolver failed", block.mat());
    }
    return std::make_pair(es.eigenvalues()(0), Vector(es.eigenvectors().col(0)));
  };

  auto finish = [&](const Matrix& p_best, double f_best, int iters) {
    LmiCandidate cand{SymMatrix(p_best)};
    MembershipReport rep = membership(model, weights, cand, opts.tol, opts.rank_tol);
    return FeasibilityResult{rep.member, std::move(cand), rep, iters, f_best};
  };

  Matrix p = Matrix::Zero(n, n);
  auto [f, v] = eval(p);

  // The zero candidate is a member whenever the unshifted weights are already
  // definite enough; accept it without ascending.
  {
    MembershipReport rep = membership(model, weights, LmiCandidate{SymMatrix(p)},
                                      opts.tol, opts.rank_tol);
    if (rep.member) {
      return FeasibilityResult{true, LmiCandidate{SymMatrix(p)}, rep, 0, f};
    }
  }

  Matrix p_best = p;
  double f_best = f;
  double step = opts.step;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (f >= opts.accept_margin) break;  // strictly interior, kernel empty

    const Vector u = v.head(n);
    const Vector w = v.tail(model.input_dim());
    const Vector y = model.C * u + model.D * w;
    Matrix grad = model.A * u * u.transpose() + u * u.transpose() * model.A.transpose() +
                  model.B * w * u.transpose() + u * w.transpose() * model.B.transpose() +
                  y * y.transpose();
    grad = 0.5 * (grad + grad.transpose());

    const double grad_norm = grad.norm();
    if (grad_norm < 1e-14) {
      // Zero subgradient of a concave objective: p is a global maximizer, so
      // a negative value here certifies infeasibility of the PSD part.
      break;
    }

    const Matrix trial = p + (step / grad_norm) * grad;
    const auto [f_trial, v_trial] = eval(trial);
    if (f_trial > f) {
      p = trial;
      f = f_trial;
      v = v_trial;
      if (f > f_best) {
        f_best = f;
        p_best = p;
      }
      step *= 1.5;
    } else {
      step *= 0.5;
      if (step < 1e-12) {
        // Stalled at a nonsmooth point; restart near the best iterate.
        p = p_best;
        const double scale = 0.1 * std::max(1.0, p_best.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i; j < n; ++j) {
            const double e = scale * noise(rng);
            p(i, j) += e;
            p(j, i) = p(i, j);
          }
        std::tie(f, v) = eval(p);
        step = opts.step;
      }
    }
  }

  if (f > f_best) {
    f_best = f;
    p_best = p;
  }
  return finish(p_best, f_best, iter);
}

}  // namespace islq::lmi
