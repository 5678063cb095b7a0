#pragma once

// Shared fixtures for the test suites: the bundled two-state indefinite
// example (examples/paper_sec4.json), closed-form oracles for its stationary
// solution, random-instance generators, and a tiny process runner for CLI
// round trips.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "islq/lmi.hpp"
#include "islq/matops.hpp"
#include "islq/riccati.hpp"
#include "islq/stability.hpp"
#include "islq/types.hpp"

namespace islq::test {

inline SystemModel sec4_model() {
  Matrix a(2, 2), b(2, 1), c(2, 2), d(2, 1);
  a << 0.01, 0.0, 0.0, -0.1;
  b << 0.2, 0.0;
  c << -0.1, 0.0, 0.0, 0.1;
  d << 0.6, 0.0;
  return SystemModel(a, b, c, d);
}

inline CostWeights sec4_weights() {
  Matrix q(2, 2), r(1, 1);
  q << 0.5, 0.0, 0.0, -1.0;
  r << -0.05;
  return CostWeights{SymMatrix(q), SymMatrix(r), std::nullopt};
}

inline Vector sec4_x0() {
  Vector x0(2);
  x0 << -0.01, 0.1;
  return x0;
}

// For this diagonal example the stationary equation decouples: the first
// diagonal entry solves the scalar quadratic
//   0.0088 p^2 - 0.1785 p + 0.025 = 0        (maximal root),
// and the second solves -0.19 p - 1 = 0. Exact arithmetic oracles, derived
// by direct substitution of the example's coefficients.
inline double sec4_p1_oracle() {
  return (0.1785 + std::sqrt(0.1785 * 0.1785 - 4.0 * 0.0088 * 0.025)) /
         (2.0 * 0.0088);
}
inline double sec4_p2_oracle() { return -1.0 / 0.19; }

inline SymMatrix sec4_pbar_oracle() {
  Matrix p(2, 2);
  p << sec4_p1_oracle(), 0.0, 0.0, sec4_p2_oracle();
  return SymMatrix(p);
}

inline double sec4_omega_oracle() { return -0.05 + 0.36 * sec4_p1_oracle(); }
inline double sec4_k1_oracle() {
  // -(B'P + D'PC) / Omega on the first coordinate: 0.14 p1 / Omega.
  return -0.14 * sec4_p1_oracle() / sec4_omega_oracle();
}

inline SymMatrix sec4_member_candidate() {
  // Verified interior point of the candidate set for the example.
  Matrix p(2, 2);
  p << 4.0, 0.0, 0.0, -8.0;
  return SymMatrix(p);
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline SymMatrix random_sym(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return SymMatrix(random_matrix(rng, n, n, scale));
}

inline SymMatrix random_psd(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  const Matrix g = random_matrix(rng, n, n, scale);
  return SymMatrix(Matrix(g.transpose() * g));
}

struct CorpusInstance {
  SystemModel model;
  CostWeights weights;
  lmi::LmiCandidate cand;
};

/// Seeded corpus of small stabilizable instances (n <= 3) whose candidate
/// search succeeds and whose stationary solve converges. Open loops are
/// shifted to a second-moment decay rate of 0.6 so the solves stay short.
inline std::vector<CorpusInstance> make_corpus(int want, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CorpusInstance> out;
  for (int attempt = 0; static_cast<int>(out.size()) < want && attempt < want * 30;
       ++attempt) {
    const Eigen::Index n = 1 + attempt % 3;
    const Eigen::Index m = 1 + attempt % 2;
    Matrix a = random_matrix(rng, n, n);
    const Matrix c = random_matrix(rng, n, n, 0.4);
    const Matrix b = random_matrix(rng, n, m);
    const Matrix d = random_matrix(rng, n, m, 0.3);

    const auto open = stability::mean_square_stable(a, c);
    a -= 0.5 * (open.spectral_abscissa + 0.6) * Matrix::Identity(n, n);

    SymMatrix q = random_psd(rng, n);
    if (attempt % 2 == 1) {
      // Mildly indefinite state weight to exercise the shifted machinery.
      q = SymMatrix(Matrix(q.mat() - 0.05 * Matrix::Identity(n, n)));
    }
    const SymMatrix r_psd = random_psd(rng, m);
    const SymMatrix r = SymMatrix(Matrix(r_psd.mat() + 0.2 * Matrix::Identity(m, m)));

    try {
      SystemModel model(a, b, c, d);
      CostWeights weights{q, r, std::nullopt};
      lmi::FeasibilityOptions fopts;
      fopts.seed = seed + static_cast<std::uint64_t>(attempt);
      auto feas = lmi::find_feasible(model, weights, fopts);
      if (!feas.feasible) continue;

      riccati::GareSolveOptions sopts;
      sopts.max_horizon = 400.0;
      riccati::solve_gare(model, weights, feas.candidate, sopts);  // convergence probe
      out.push_back(CorpusInstance{std::move(model), std::move(weights),
                                   std::move(feas.candidate)});
    } catch (const Error&) {
      continue;
    }
  }
  return out;
}

/// Sample a nearby member of the candidate set by shrinking perturbations of
/// a known (interior) member until membership holds again.
inline std::optional<lmi::LmiCandidate> sample_member_near(
    const SystemModel& model, const CostWeights& weights, const lmi::LmiCandidate& base,
    std::mt19937_64& rng, double tol = 1e-8) {
  double scale = 0.05 * (1.0 + base.p_hat.mat().cwiseAbs().maxCoeff());
  const SymMatrix dir = random_sym(rng, base.p_hat.dim());
  for (int i = 0; i < 14; ++i, scale *= 0.5) {
    lmi::LmiCandidate cand{SymMatrix(Matrix(base.p_hat.mat() + scale * dir.mat()))};
    if (lmi::membership(model, weights, cand, tol).member) return cand;
  }
  return std::nullopt;
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout; stderr passes through.
inline CmdResult run_cmd(const std::string& cmd) {
  CmdResult result;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return result;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) {
    result.out.append(buf, got);
  }
  const int status = ::pclose(pipe);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

}  // namespace islq::test
