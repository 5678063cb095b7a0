// Acceptance suite: end-to-end checks of the solver against the bundled
// two-state indefinite example (examples/paper_sec4.json), closed-form
// oracles, and a seeded random corpus. Prints one PASS/FAIL line per
// criterion; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "islq/lmi.hpp"
#include "islq/matops.hpp"
#include "islq/problem_io.hpp"
#include "islq/riccati.hpp"
#include "islq/simulate.hpp"
#include "islq/stability.hpp"
#include "test_support.hpp"

using namespace islq;
using nlohmann::json;

namespace {

const std::string kCli = ISLQ_CLI_PATH;
const std::string kProblemFile = std::string(ISLQ_EXAMPLES_DIR) + "/paper_sec4.json";

struct Criterion {
  std::string id;
  std::string name;
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& detail) {
    if (!ok) {
      pass = false;
      notes.push_back(detail);
    }
  }
  void info(const std::string& detail) { notes.push_back(detail); }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

class Harness {
 public:
  Criterion& add(std::string id, std::string name) {
    Criterion c;
    c.id = std::move(id);
    c.name = std::move(name);
    criteria_.push_back(std::move(c));
    return criteria_.back();
  }

  int report() const {
    int failed = 0;
    for (const auto& c : criteria_) {
      std::string line = "[" + c.id + "] " + c.name + " ";
      while (line.size() < 62) line.push_back('.');
      line += c.pass ? " PASS" : " FAIL";
      std::cout << line << "\n";
      for (const auto& n : c.notes) std::cout << "       - " << n << "\n";
      if (!c.pass) ++failed;
    }
    std::cout << "acceptance: " << (criteria_.size() - failed) << "/" << criteria_.size()
              << " criteria passed\n";
    return failed;
  }

 private:
  std::vector<Criterion> criteria_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix matrix_from_json(const json& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j].get<double>();
  return m;
}

struct CorpusArtifacts {
  test::CorpusInstance instance;
  riccati::GareSolution sol;
};

}  // namespace

int main() {
  Harness harness;
  const auto model = test::sec4_model();
  const auto weights = test::sec4_weights();
  const io::ProblemFile pf = io::load_problem(kProblemFile);

  const double p1_oracle = test::sec4_p1_oracle();
  const double p2_oracle = test::sec4_p2_oracle();

  // --- C01: CLI solve on the bundled problem ------------------------------
  json report;
  {
    auto& c = harness.add("C01", "stationary solve reproduces the bundled example");
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = test::run_cmd(kCli + " solve " + kProblemFile);
    const double elapsed = seconds_since(t0);
    c.check(res.exit_code == 0, "exit code " + std::to_string(res.exit_code));
    try {
      report = json::parse(res.out);
      const Matrix p_bar = matrix_from_json(report["p_bar"]);
      c.check(std::abs(p_bar(0, 0) - 20.143) <= 1e-2,
              "p_bar(0,0) = " + fmt(p_bar(0, 0)) + " vs 20.143 +- 1e-2");
      c.check(std::abs(p_bar(1, 1) - (-5.2632)) <= 1e-2,
              "p_bar(1,1) = " + fmt(p_bar(1, 1)) + " vs -5.2632 +- 1e-2");
      c.check(std::abs(p_bar(0, 1)) <= 1e-2, "off-diagonal " + fmt(p_bar(0, 1)));
      c.check(std::abs(p_bar(0, 0) - p1_oracle) <= 1e-6,
              "p_bar(0,0) vs closed-form root: " + fmt(p_bar(0, 0) - p1_oracle));
      c.check(std::abs(p_bar(1, 1) - p2_oracle) <= 1e-6,
              "p_bar(1,1) vs closed-form root: " + fmt(p_bar(1, 1) - p2_oracle));
    } catch (const std::exception& e) {
      c.check(false, std::string("report parse failure: ") + e.what());
    }
    c.check(elapsed < 10.0, "runtime " + fmt(elapsed) + " s exceeds 10 s");
  }

  // Library-side solve, shared by the remaining criteria (deterministic, same
  // configuration as the CLI run).
  const auto feas = lmi::find_feasible(model, weights);
  riccati::GareSolveOptions solve_opts;
  solve_opts.conv_tol = pf.tolerances.conv_tol;
  solve_opts.max_horizon = pf.horizon.max_horizon;
  solve_opts.step = pf.horizon.step;
  const auto sol = riccati::solve_gare(model, weights, feas.candidate, solve_opts);
  const auto shifted = lmi::shifted_weights(model, weights, feas.candidate);

  // --- C02: residuals at the returned solution ----------------------------
  {
    auto& c = harness.add("C02", "stationary equation residuals at the solution");
    const auto res = riccati::gare_residual(model, weights, sol.p_bar);
    c.check(res.res <= 1e-6, "residual " + fmt(res.res) + " > 1e-6");
    c.check(res.reg_defect <= 1e-7, "regularity defect " + fmt(res.reg_defect) + " > 1e-7");
    c.check(std::abs(res.omega_min - 7.2015) <= 1e-3,
            "omega min eig " + fmt(res.omega_min) + " vs 7.2015 +- 1e-3");
    if (!report.is_null()) {
      c.check(report["residual"].get<double>() <= 1e-6, "CLI-reported residual");
      c.check(report["regularity_defect"].get<double>() <= 1e-7,
              "CLI-reported regularity defect");
    }
  }

  // --- C03: gain consistency ----------------------------------------------
  {
    auto& c = harness.add("C03", "feedback gain matches the pseudo-inverse formula");
    const Matrix k_direct = riccati::finite_gain(model, weights, sol.p_bar);
    c.check(max_abs(sol.k_gain - k_direct) <= 1e-8,
            "solver gain vs direct formula: " + fmt(max_abs(sol.k_gain - k_direct)));
    c.check(std::abs(sol.k_gain(0, 0) - (-0.3916)) <= 1e-3,
            "k1 = " + fmt(sol.k_gain(0, 0)) + " vs -0.3916 +- 1e-3");
    c.check(std::abs(sol.k_gain(0, 1)) <= 1e-3, "k2 = " + fmt(sol.k_gain(0, 1)));
    if (!report.is_null()) {
      const Matrix k_cli = matrix_from_json(report["k_gain"]);
      c.check(max_abs(k_cli - k_direct) <= 1e-8, "CLI-reported gain");
    }
  }

  const Matrix a_cl = model.A + model.B * sol.k_gain;
  const Matrix c_cl = model.C + model.D * sol.k_gain;

  // --- C04: stabilization (spectral + Monte Carlo) -------------------------
  {
    auto& c = harness.add("C04", "closed-loop stabilization and Monte Carlo decay");
    const auto stab = stability::mean_square_stable(a_cl, c_cl);
    c.check(stab.spectral_abscissa <= -0.02,
            "spectral abscissa " + fmt(stab.spectral_abscissa) + " > -0.02");

    const auto t0 = std::chrono::steady_clock::now();
    const auto stats = sim::simulate_closedloop(
        model, weights, sim::GainSchedule::constant(sol.k_gain), pf.sim);
    const double elapsed = seconds_since(t0);

    const std::size_t k30 = static_cast<std::size_t>(std::llround(30.0 / pf.sim.dt));
    const double ratio = stats.mean_sq[k30] / stats.mean_sq[0];
    c.check(ratio < 1e-3, "mean_sq(30)/mean_sq(0) = " + fmt(ratio) +
                              " >= 1e-3 (moment rates -0.0244/-0.19 admit at best "
                              "~8.1e-3; threshold unattainable for this loop)");

    const auto ode = stability::second_moment_ode(
        a_cl, c_cl, SymMatrix(Matrix(pf.sim.x0 * pf.sim.x0.transpose())), pf.sim.dt, 30.0);
    const double ode30 = ode.trace().back();
    c.check(std::abs(stats.mean_sq[k30] - ode30) <= 4.0 * stats.mean_sq_se[k30],
            "mean_sq(30) = " + fmt(stats.mean_sq[k30]) + " vs moment ODE " + fmt(ode30) +
                " +- 4*SE (" + fmt(4.0 * stats.mean_sq_se[k30]) + ")");
    c.check(elapsed < 30.0, "Monte Carlo runtime " + fmt(elapsed) + " s exceeds 30 s");
  }

  // --- C05: truncated cost vs quadratic value ------------------------------
  {
    auto& c = harness.add("C05", "truncated Monte Carlo cost matches the value");
    const double target = pf.sim.x0(0) * pf.sim.x0(0) * p1_oracle +
                          pf.sim.x0(1) * pf.sim.x0(1) * p2_oracle;
    const auto cmp =
        sim::estimate_cost_vs_value(model, weights, sol.k_gain, sol.p_bar, pf.sim);
    c.check(std::abs(cmp.cost_estimate - target) <= 3.0 * cmp.cost_se + cmp.tail_bound,
            "cost " + fmt(cmp.cost_estimate) + " vs " + fmt(target) + " +- (3*SE=" +
                fmt(3.0 * cmp.cost_se) + " + tail=" + fmt(cmp.tail_bound) + ")");
    c.check(cmp.tail_bound < 0.1 * std::abs(target),
            "tail bound " + fmt(cmp.tail_bound) + " >= 10% of |value|");
    c.info("cost " + fmt(cmp.cost_estimate) + " +- " + fmt(cmp.cost_se) + ", value " +
           fmt(target) + ", tail " + fmt(cmp.tail_bound));
  }

  // --- C06: shifted-solution properties on a random corpus -----------------
  std::vector<CorpusArtifacts> corpus_artifacts;
  {
    auto& c = harness.add("C06", "shifted-solution properties on a random corpus");
    const auto corpus = test::make_corpus(10, 20260810);
    c.check(corpus.size() == 10,
            "only generated " + std::to_string(corpus.size()) + "/10 instances");
    std::mt19937_64 rng(314159);

    for (std::size_t idx = 0; idx < corpus.size(); ++idx) {
      const auto& inst = corpus[idx];
      const std::string tag = "instance " + std::to_string(idx);
      const auto sw = lmi::shifted_weights(inst.model, inst.weights, inst.cand);

      riccati::GareSolveOptions opts;
      opts.max_horizon = 800.0;
      const auto sol1 = riccati::solve_gare(inst.model, inst.weights, inst.cand, opts);
      corpus_artifacts.push_back(CorpusArtifacts{inst, sol1});

      // Monotone in t along the grid (grid is decreasing in t).
      const auto sdre = riccati::integrate_sdre(inst.model, sw, 20.0, 1e-3);
      bool monotone = true;
      for (std::size_t k = 0; k + 1 < sdre.p_of_t.size() && monotone; ++k) {
        monotone = matops::min_eig_sym(sdre.p_of_t[k + 1].mat() -
                                       sdre.p_of_t[k].mat()) >= -1e-8;
      }
      c.check(monotone, tag + ": shifted solution not monotone in t");

      // Monotone in the horizon: larger backward horizon dominates.
      const std::size_t per_unit = (sdre.grid.size() - 1) / 20;
      bool monotone_T = true;
      for (int a = 1; a < 4 && monotone_T; ++a) {
        const auto& z1 = sdre.p_of_t[per_unit * 5 * a];
        const auto& z2 = sdre.p_of_t[per_unit * 5 * (a + 1)];
        monotone_T = matops::min_eig_sym(z2.mat() - z1.mat()) >= -1e-8;
      }
      c.check(monotone_T, tag + ": shifted solution not monotone in the horizon");

      // Decomposition: unshifted backward solution = shifted + candidate.
      const auto gdre = riccati::integrate_gdre(inst.model, inst.weights,
                                                inst.cand.p_hat, 20.0, 1e-3);
      double worst = 0.0;
      for (std::size_t k = 0; k < gdre.p_of_t.size(); ++k) {
        worst = std::max(worst, max_abs(gdre.p_of_t[k].mat() - sdre.p_of_t[k].mat() -
                                        inst.cand.p_hat.mat()));
      }
      c.check(worst <= 1e-6, tag + ": decomposition defect " + fmt(worst));

      // Solution independent of the member chosen.
      const auto other = test::sample_member_near(inst.model, inst.weights,
                                                  inst.cand, rng);
      if (other) {
        const auto sol2 = riccati::solve_gare(inst.model, inst.weights, *other, opts);
        c.check(max_abs(sol1.p_bar.mat() - sol2.p_bar.mat()) <= 1e-6,
                tag + ": solutions from two members differ by " +
                    fmt(max_abs(sol1.p_bar.mat() - sol2.p_bar.mat())));
      } else {
        c.check(false, tag + ": could not sample a second member");
      }

      // Maximality: the solution dominates sampled members.
      for (int s = 0; s < 3; ++s) {
        const auto member = test::sample_member_near(inst.model, inst.weights,
                                                     inst.cand, rng);
        if (!member) continue;
        const double gap =
            matops::min_eig_sym(sol1.p_bar.mat() - member->p_hat.mat());
        c.check(gap >= -1e-8, tag + ": sampled member exceeds the solution by " + fmt(gap));
      }
    }
  }

  // --- C07: finite-horizon value identity ----------------------------------
  {
    auto& c = harness.add("C07", "finite-horizon value identity (closed form + MC)");
    Matrix a(1, 1), b(1, 1), z(1, 1), q(1, 1);
    a << 0.0;
    b << 1.0;
    z << 0.0;
    q << 1.0;
    const SystemModel scalar_model(a, b, z, z);
    const CostWeights scalar_weights{SymMatrix(q), SymMatrix(q), std::nullopt};
    const auto gdre = riccati::integrate_gdre(scalar_model, scalar_weights,
                                              SymMatrix::zero(1), 10.0, 1e-3);
    const double p0 = gdre.p_of_t.back().mat()(0, 0);
    c.check(std::abs(p0 - std::tanh(10.0)) <= 1e-6,
            "P(0) = " + fmt(p0) + " vs tanh(10), diff " + fmt(p0 - std::tanh(10.0)));

    sim::SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 10.0;
    cfg.paths = 64;
    cfg.seed = 4242;
    cfg.x0 = Vector::Ones(1);
    const auto cmp = sim::simulate_finite_horizon(scalar_model, scalar_weights, gdre, cfg);
    c.check(std::abs(cmp.cost_estimate - cmp.value_target) <= 3.0 * cmp.cost_se,
            "MC cost " + fmt(cmp.cost_estimate) + " vs value " + fmt(cmp.value_target) +
                ": |diff| = " + fmt(std::abs(cmp.cost_estimate - cmp.value_target)) +
                " > 3*SE = " + fmt(3.0 * cmp.cost_se) +
                " (noise-free instance: SE is 0 while the Euler scheme carries an O(dt) "
                "bias, so this bound cannot be met by any discretization)");
  }

  // --- C08: certificate decrease along the closed loop ----------------------
  {
    auto& c = harness.add("C08", "certificate trace is non-increasing on [0, 60]");
    const auto series =
        stability::lyapunov_trace(model, sol.k_gain, sol.z_bar, pf.sim.x0, 1e-3, 60.0);
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < series.v.size(); ++k) {
      const double rise = series.v[k + 1] - series.v[k];
      if (rise > 1e-10) {
        ++violations;
        worst = std::max(worst, rise);
      }
    }
    c.check(violations == 0, std::to_string(violations) +
                                 " grid points rise by more than 1e-10 (worst " +
                                 fmt(worst) + ")");
  }

  // --- C09: detectability preserved ----------------------------------------
  {
    auto& c = harness.add("C09", "closing the loop preserves exact detectability");
    const SymMatrix q_half = matops::sqrt_psd(shifted.q_shift, 1e-8);
    const bool assumption =
        stability::exact_detectable(model.A, model.C, q_half.mat()).detectable;
    c.check(assumption, "bundled example: detectability assumption fails");
    if (assumption) {
      c.check(stability::detectability_preserved(model, shifted, sol.z_bar),
              "bundled example: preservation check failed");
    }

    int applicable = 0;
    for (std::size_t idx = 0; idx < corpus_artifacts.size(); ++idx) {
      const auto& art = corpus_artifacts[idx];
      const auto sw = lmi::shifted_weights(art.instance.model, art.instance.weights,
                                           art.instance.cand);
      SymMatrix qh = matops::sqrt_psd(sw.q_shift, 1e-8);
      if (!stability::exact_detectable(art.instance.model.A, art.instance.model.C,
                                       qh.mat())
               .detectable) {
        continue;  // precondition does not hold for this instance
      }
      ++applicable;
      c.check(stability::detectability_preserved(art.instance.model, sw, art.sol.z_bar),
              "corpus instance " + std::to_string(idx) + ": preservation check failed");
    }
    c.info("corpus instances with the detectability precondition: " +
           std::to_string(applicable) + "/" + std::to_string(corpus_artifacts.size()));
  }

  // --- C10: pseudo-inverse and kernel suites --------------------------------
  {
    auto& c = harness.add("C10", "pseudo-inverse identities and kernel orthonormality");
    std::mt19937_64 rng(1234);
    double worst_identity = 0.0;
    double worst_ortho = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index rows = 1 + trial % 6;
      const Eigen::Index cols = 1 + (trial / 3) % 6;
      Matrix m = test::random_matrix(rng, rows, cols);
      if (trial % 4 == 0 && std::min(rows, cols) > 1) {
        m = test::random_matrix(rng, rows, std::min(rows, cols) - 1) *
            test::random_matrix(rng, std::min(rows, cols) - 1, cols);
      }
      const Matrix p = matops::pinv(m);
      worst_identity = std::max({worst_identity, max_abs(m * p * m - m),
                                 max_abs(p * m * p - p),
                                 max_abs(Matrix((m * p).transpose() - m * p)),
                                 max_abs(Matrix((p * m).transpose() - p * m))});
      const Matrix kb = matops::kernel_basis(m);
      if (kb.cols() > 0) {
        worst_ortho = std::max(
            worst_ortho,
            max_abs(Matrix(kb.transpose() * kb -
                           Matrix::Identity(kb.cols(), kb.cols()))));
      }
    }
    c.check(worst_identity <= 1e-10,
            "worst Moore-Penrose identity defect " + fmt(worst_identity));
    c.check(worst_ortho <= 1e-12, "worst kernel orthonormality defect " + fmt(worst_ortho));
    c.info("worst identity defect " + fmt(worst_identity) + ", worst orthonormality " +
           fmt(worst_ortho));
  }

  const int failed = harness.report();
  return failed == 0 ? 0 : 1;
}
