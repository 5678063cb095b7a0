#include "islq/stability.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "islq/riccati.hpp"

namespace islq::stability {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

// Orthonormal basis of symmetric n x n matrices under <X,Y> = tr(XY):
// E_ii = e_i e_i', E_ij = (e_i e_j' + e_j e_i') / sqrt(2).
Eigen::Index sym_dim(Eigen::Index n) { return n * (n + 1) / 2; }

Matrix smat_basis(Eigen::Index n, Eigen::Index k) {
  Matrix out = Matrix::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j, ++idx) {
      if (idx == k) {
        if (i == j) {
          out(i, i) = 1.0;
        } else {
          out(i, j) = out(j, i) = 1.0 / std::sqrt(2.0);
        }
        return out;
      }
    }
  }
  throw ContractViolation("smat_basis: index out of range");
}

Vector svec(const Matrix& x) {
  const auto n = x.rows();
  Vector out(sym_dim(n));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++idx)
      out(idx) = (i == j) ? x(i, i) : std::sqrt(2.0) * x(i, j);
  return out;
}

ComplexMatrix smat(const Eigen::VectorXcd& v, Eigen::Index n) {
  ComplexMatrix out(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++idx) {
      if (i == j) {
        out(i, i) = v(idx);
      } else {
        out(i, j) = out(j, i) = v(idx) / std::sqrt(2.0);
      }
    }
  return out;
}

// Matrix of X |-> AX + XA' + CXC' restricted to symmetric matrices, in the
// orthonormal basis above.
Matrix moment_operator_sym(const Matrix& a, const Matrix& c) {
  const auto n = a.rows();
  const auto nn = sym_dim(n);
  Matrix op(nn, nn);
  for (Eigen::Index k = 0; k < nn; ++k) {
    const Matrix e = smat_basis(n, k);
    const Matrix image = a * e + e * a.transpose() + c * e * c.transpose();
    op.col(k) = svec(image);
  }
  return op;
}

DetectabilityResult detectability_eigen_test(const Matrix& a, const Matrix& c,
                                             const Matrix& q_half, double tol,
                                             bool skip_decaying_modes) {
  const auto n = a.rows();
  if (n == 0 || a.cols() != n || c.rows() != n || c.cols() != n) {
    throw ContractViolation("exact_detectable: A, C must be square of equal dim");
  }
  if (q_half.rows() != n || q_half.cols() != n) {
    throw ContractViolation("exact_detectable: q_half must be n x n");
  }

  const Matrix op = moment_operator_sym(a, c);
  Eigen::EigenSolver<Matrix> es(op);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("exact_detectable: eigensolver failed", op);
  }

  DetectabilityResult result;
  result.detectable = true;
  for (Eigen::Index i = 0; i < op.rows(); ++i) {
    const double re = es.eigenvalues()(i).real();
    if (skip_decaying_modes && re < -tol) continue;

    const ComplexMatrix x = smat(es.eigenvectors().col(i), n);
    const double x_norm = x.norm();
    if (x_norm == 0.0) continue;
    if ((q_half * x).norm() > tol * x_norm) continue;  // mode is seen

    result.detectable = false;
    result.witness_eig_real = re;
    Matrix w = x.real();
    if (w.cwiseAbs().maxCoeff() < 1e-12 * x_norm) w = x.imag();
    w /= w.norm();
    result.witness = SymMatrix(0.5 * (w + w.transpose()));
    return result;
  }
  return result;
}

}  // namespace

StabilityReport mean_square_stable(const Matrix& a_cl, const Matrix& c_cl) {
  const Matrix lift = matops::moment_lift(a_cl, c_cl);
  Eigen::EigenSolver<Matrix> es(lift, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("mean_square_stable: eigensolver failed", lift);
  }
  StabilityReport report;
  report.spectral_abscissa = es.eigenvalues().real().maxCoeff();
  report.stable = report.spectral_abscissa < 0.0;
  report.decay_rate = report.stable ? -report.spectral_abscissa : 0.0;
  return report;
}

DetectabilityResult exact_detectable(const Matrix& a, const Matrix& c,
                                     const Matrix& q_half, double tol) {
  return detectability_eigen_test(a, c, q_half, tol, /*skip_decaying_modes=*/true);
}

std::vector<double> SecondMomentSeries::trace() const {
  std::vector<double> out;
  out.reserve(x_of_t.size());
  for (const auto& x : x_of_t) out.push_back(x.mat().trace());
  return out;
}

SecondMomentSeries second_moment_ode(const Matrix& a_cl, const Matrix& c_cl,
                                     const SymMatrix& x0, double dt, double t_end) {
  const auto n = a_cl.rows();
  if (c_cl.rows() != n || c_cl.cols() != n || a_cl.cols() != n) {
    throw ContractViolation("second_moment_ode: A, C must be square of equal dim");
  }
  if (x0.dim() != n) throw ContractViolation("second_moment_ode: x0 must be n x n");
  if (dt <= 0.0 || t_end < dt) {
    throw ContractViolation("second_moment_ode: need dt > 0 and t_end >= dt");
  }

  auto flow = [&](const Matrix& x) -> Matrix {
    return a_cl * x + x * a_cl.transpose() + c_cl * x * c_cl.transpose();
  };

  const long nsteps = std::lround(t_end / dt);
  SecondMomentSeries series;
  series.grid.reserve(nsteps + 1);
  series.x_of_t.reserve(nsteps + 1);

  Matrix x = x0.mat();
  series.grid.push_back(0.0);
  series.x_of_t.emplace_back(x);
  for (long k = 1; k <= nsteps; ++k) {
    const Matrix k1 = flow(x);
    const Matrix k2 = flow(x + (0.5 * dt) * k1);
    const Matrix k3 = flow(x + (0.5 * dt) * k2);
    const Matrix k4 = flow(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x = 0.5 * (x + x.transpose());
    if (!x.allFinite()) {
      throw NumericalFailure("second_moment_ode: non-finite values at t=" +
                                 std::to_string(k * dt),
                             x);
    }
    series.grid.push_back(static_cast<double>(k) * dt);
    series.x_of_t.emplace_back(x);
  }
  return series;
}

LyapunovSeries lyapunov_trace(const SystemModel& model, const Matrix& gain,
                              const SymMatrix& z, const Vector& x0, double dt,
                              double t_end, double psd_tol) {
  if (gain.rows() != model.input_dim() || gain.cols() != model.state_dim()) {
    throw ContractViolation("lyapunov_trace: gain must be m x n");
  }
  if (x0.size() != model.state_dim()) {
    throw ContractViolation("lyapunov_trace: x0 must be length n");
  }
  if (matops::min_eig_sym(z.mat()) < -psd_tol) {
    throw ContractViolation("lyapunov_trace: z must be PSD within tolerance");
  }

  const Matrix a_cl = model.A + model.B * gain;
  const Matrix c_cl = model.C + model.D * gain;
  const SymMatrix x0sq{Matrix(x0 * x0.transpose())};
  const auto series = second_moment_ode(a_cl, c_cl, x0sq, dt, t_end);

  LyapunovSeries out;
  out.grid = series.grid;
  out.v.reserve(series.x_of_t.size());
  for (const auto& x : series.x_of_t) out.v.push_back((z.mat() * x.mat()).trace());
  return out;
}

bool detectability_preserved(const SystemModel& model, const lmi::ShiftedWeights& shifted,
                             const SymMatrix& z_bar, double tol) {
  const SymMatrix q_half = matops::sqrt_psd(shifted.q_shift, 1e-8);
  if (!exact_detectable(model.A, model.C, q_half.mat(), tol).detectable) {
    throw ContractViolation(
        "detectability_preserved: (A, C, sqrt(q_shift)) is not exact detectable");
  }
  const auto cl = riccati::closedloop_data(model, shifted, z_bar);
  const SymMatrix q_cl_half = matops::sqrt_psd(cl.q_cl, 1e-8);
  return exact_detectable(cl.a_cl, cl.c_cl, q_cl_half.mat(), tol).detectable;
}

namespace detail {
DetectabilityResult exact_observable(const Matrix& a, const Matrix& c,
                                     const Matrix& q_half, double tol) {
  return detectability_eigen_test(a, c, q_half, tol, /*skip_decaying_modes=*/false);
}
}  // namespace detail

}  // namespace islq::stability
