#include "islq/matops.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

namespace islq::matops {

namespace {

Eigen::JacobiSVD<Matrix> full_svd(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("SVD failed to converge", m);
  }
  return svd;
}

double resolve_rank_tol(const Matrix& m, double rank_tol, double sigma_max) {
  if (rank_tol == kAutoRankTol) return default_rank_tol(m.rows(), m.cols(), sigma_max);
  if (rank_tol < 0.0) throw ContractViolation("rank_tol must be >= 0");
  return rank_tol;
}

}  // namespace

double default_rank_tol(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return std::numeric_limits<double>::epsilon() *
         static_cast<double>(std::max(rows, cols)) * sigma_max;
}

Matrix pinv(const Matrix& m, double rank_tol) {
  if (m.size() == 0) throw ContractViolation("pinv: empty matrix");
  const auto svd = full_svd(m);
  const Vector& sv = svd.singularValues();
  const double tol = resolve_rank_tol(m, rank_tol, sv.size() > 0 ? sv(0) : 0.0);

  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) inv(i) = 1.0 / sv(i);
  }
  const Eigen::Index k = sv.size();
  return svd.matrixV().leftCols(k) * inv.asDiagonal() *
         svd.matrixU().leftCols(k).transpose();
}

double min_eig_sym(const Matrix& s) {
  if (s.size() == 0 || s.rows() != s.cols()) {
    throw ContractViolation("min_eig_sym: need a nonempty square matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigensolver failed to converge", s);
  }
  return es.eigenvalues()(0);
}

bool psd(const Matrix& s, double tol) { return min_eig_sym(s) >= -tol; }

Matrix kernel_basis(const Matrix& m, double rank_tol) {
  if (m.size() == 0) throw ContractViolation("kernel_basis: empty matrix");
  const auto svd = full_svd(m);
  const Vector& sv = svd.singularValues();
  const double tol = resolve_rank_tol(m, rank_tol, sv.size() > 0 ? sv(0) : 0.0);

  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  return svd.matrixV().rightCols(m.cols() - rank);
}

bool kernel_included(const Matrix& m, const std::vector<Matrix>& targets,
                     double tol, double rank_tol) {
  for (const Matrix& t : targets) {
    if (t.cols() != m.cols()) {
      throw ContractViolation("kernel_included: target has " + std::to_string(t.cols()) +
                              " columns, expected " + std::to_string(m.cols()));
    }
  }
  const Matrix basis = kernel_basis(m, rank_tol);
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (const Matrix& t : targets) {
      if ((t * basis.col(j)).norm() > tol) return false;
    }
  }
  return true;
}

SymMatrix sqrt_psd(const SymMatrix& s, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.mat());
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigensolver failed to converge", s.mat());
  }
  const double min_eig = es.eigenvalues()(0);
  if (min_eig < -tol) {
    throw NotPsd("sqrt_psd: matrix is not PSD, eigenvalue " + std::to_string(min_eig),
                 min_eig);
  }
  const Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Matrix moment_lift(const Matrix& a_cl, const Matrix& c_cl) {
  const auto n = a_cl.rows();
  if (n == 0 || a_cl.cols() != n || c_cl.rows() != n || c_cl.cols() != n) {
    throw ContractViolation("moment_lift: need square matrices of equal dim");
  }
  auto kron = [n](const Matrix& x, const Matrix& y) {
    Matrix out(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        out.block(i * n, j * n, n, n) = x(i, j) * y;
    return out;
  };
  const Matrix eye = Matrix::Identity(n, n);
  return kron(eye, a_cl) + kron(a_cl, eye) + kron(c_cl, c_cl);
}

}  // namespace islq::matops
