#pragma once

#include <vector>

#include "islq/types.hpp"

// Dense symmetric-matrix utilities shared by the whole library: SVD
// pseudo-inverse, eigenvalue-based PSD tests, kernel bases, the PSD square
// root, and the Kronecker lift of the second-moment dynamics.
namespace islq::matops {

/// Sentinel: pick the rank cutoff automatically as
/// machine_eps * max(rows, cols) * sigma_max.
inline constexpr double kAutoRankTol = -1.0;

double default_rank_tol(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Moore-Penrose pseudo-inverse via SVD: singular values above rank_tol are
/// inverted, the rest zeroed.
Matrix pinv(const Matrix& m, double rank_tol = kAutoRankTol);

/// Smallest eigenvalue of a symmetric matrix (input is symmetrized first).
double min_eig_sym(const Matrix& s);

/// PSD within tolerance: min_eig_sym(s) >= -tol.
bool psd(const Matrix& s, double tol);

/// Orthonormal basis of the null space as columns (cols x k, k possibly 0):
/// right singular vectors whose singular values are <= rank_tol.
Matrix kernel_basis(const Matrix& m, double rank_tol = kAutoRankTol);

/// True iff every kernel basis vector v of m satisfies |t * v| <= tol for
/// every target t. Vacuously true when m has full column rank.
bool kernel_included(const Matrix& m, const std::vector<Matrix>& targets,
                     double tol, double rank_tol = kAutoRankTol);

/// Unique PSD square root via eigendecomposition. Eigenvalues in [-tol, 0)
/// are clamped to zero; anything below -tol throws NotPsd.
SymMatrix sqrt_psd(const SymMatrix& s, double tol);

/// Matrix of the second-moment generator X |-> A X + X A' + C X C' acting on
/// column-major vec(X): A (+) A + C (x) C, an n^2 x n^2 matrix. The closed
/// loop is mean-square stable iff every eigenvalue has negative real part.
Matrix moment_lift(const Matrix& a_cl, const Matrix& c_cl);

}  // namespace islq::matops
