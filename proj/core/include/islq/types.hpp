#pragma once

#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "islq/errors.hpp"

namespace islq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix. Construction symmetrizes ((M + M')/2) instead of
/// rejecting and records the asymmetry defect: backward Riccati integration
/// drifts asymmetrically, and the defect is the diagnostic for how much.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
      throw ContractViolation("SymMatrix: need a square matrix of dim >= 1, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    defect_ = (m - m.transpose()).cwiseAbs().maxCoeff();
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  const Matrix& mat() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  double symmetry_defect() const noexcept { return defect_; }

 private:
  Matrix m_;
  double defect_ = 0.0;
};

/// Constant coefficients of the controlled diffusion
///   dx = (A x + B u) dt + (C x + D u) dw,
/// with one scalar noise channel. A, C are n x n; B, D are n x m.
struct SystemModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  SystemModel(Matrix a, Matrix b, Matrix c, Matrix d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    const auto n = A.rows();
    const auto m = B.cols();
    if (n == 0 || A.cols() != n) throw ContractViolation("SystemModel: A must be square, dim >= 1");
    if (m == 0 || B.rows() != n) throw ContractViolation("SystemModel: B must be n x m with m >= 1");
    if (C.rows() != n || C.cols() != n) throw ContractViolation("SystemModel: C must match A's shape");
    if (D.rows() != n || D.cols() != m) throw ContractViolation("SystemModel: D must match B's shape");
  }

  Eigen::Index state_dim() const noexcept { return A.rows(); }
  Eigen::Index input_dim() const noexcept { return B.cols(); }
};

/// Quadratic running weights x'Qx + u'Ru. Both may be indefinite. The optional
/// terminal weight only enters finite-horizon problems.
struct CostWeights {
  SymMatrix Q;
  SymMatrix R;
  std::optional<SymMatrix> terminal;
};

/// Throws unless the weights' dimensions match the model.
inline void check_dims(const SystemModel& model, const CostWeights& weights) {
  if (weights.Q.dim() != model.state_dim())
    throw ContractViolation("CostWeights: Q must be n x n");
  if (weights.R.dim() != model.input_dim())
    throw ContractViolation("CostWeights: R must be m x m");
  if (weights.terminal && weights.terminal->dim() != model.state_dim())
    throw ContractViolation("CostWeights: terminal weight must be n x n");
}

}  // namespace islq
