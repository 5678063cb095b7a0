// Command-line front end: reads a JSON problem definition, orchestrates
// feasibility -> stationary solve -> stability/detectability checks ->
// Monte Carlo simulation, and emits CSV time series plus JSON reports.
//
// Exit codes: 0 success, 1 parse/validation failure, 2 infeasible,
// 3 solved but closed loop unstable, 4 nonconvergence, 5 simulation diverged.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "islq/lmi.hpp"
#include "islq/problem_io.hpp"
#include "islq/riccati.hpp"
#include "islq/simulate.hpp"
#include "islq/stability.hpp"

namespace {

using nlohmann::json;
using namespace islq;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitUnstable = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitDiverged = 5;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

io::ProblemFile load_with_env(const std::string& path) {
  io::ProblemFile pf = io::load_problem(path);
  if (const char* env = std::getenv("ILQ_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing junk");
      pf.sim.seed = v;
    } catch (const std::exception&) {
      throw ParseError("ILQ_SEED", "must be a nonnegative integer, got '" +
                                       std::string(env) + "'");
    }
  }
  return pf;
}

// Membership of the file's p_hat when given, otherwise the subgradient search.
lmi::FeasibilityResult resolve_candidate(const io::ProblemFile& pf) {
  if (pf.p_hat) {
    lmi::LmiCandidate cand{*pf.p_hat};
    auto rep = lmi::membership(pf.model, pf.weights, cand, pf.tolerances.psd_tol,
                               pf.tolerances.rank_tol);
    return lmi::FeasibilityResult{rep.member, std::move(cand), rep, 0,
                                  rep.block_min_eig};
  }
  lmi::FeasibilityOptions opts;
  opts.tol = pf.tolerances.psd_tol;
  opts.rank_tol = pf.tolerances.rank_tol;
  return lmi::find_feasible(pf.model, pf.weights, opts);
}

json feasibility_json(const lmi::FeasibilityResult& res) {
  json j;
  j["feasible"] = res.feasible;
  j["p_hat"] = matrix_json(res.candidate.p_hat.mat());
  j["lmi_min_eig"] = res.report.block_min_eig;
  j["kernel_ok"] = res.report.kernel_ok;
  j["kernel_violation"] = res.report.kernel_violation;
  j["iterations"] = res.iterations;
  return j;
}

int cmd_feasible(const std::string& path) {
  const io::ProblemFile pf = load_with_env(path);
  const auto res = resolve_candidate(pf);
  std::cout << feasibility_json(res).dump(2) << std::endl;
  return res.feasible ? kExitOk : kExitInfeasible;
}

struct SolveOutput {
  riccati::GareSolution sol;
  stability::StabilityReport stab;
  bool assumption_detectable = false;
  std::optional<bool> preserved;
  double value = 0.0;
  lmi::FeasibilityResult feas;
};

json solve_json(const io::ProblemFile& pf, const SolveOutput& out) {
  json j;
  j["p_bar"] = matrix_json(out.sol.p_bar.mat());
  j["k_gain"] = matrix_json(out.sol.k_gain);
  j["z_bar"] = matrix_json(out.sol.z_bar.mat());
  j["p_hat"] = matrix_json(out.sol.p_hat_used.p_hat.mat());
  j["residual"] = out.sol.residual;
  j["regularity_defect"] = out.sol.regularity_defect;
  j["omega_min_eig"] = out.sol.omega_min_eig;
  j["iterations"] = out.sol.iterations;
  j["horizon"] = out.sol.horizon;
  j["detectable"] = out.assumption_detectable;
  if (out.preserved) {
    j["detectability_preserved"] = *out.preserved;
  } else {
    j["detectability_preserved"] = nullptr;
  }
  j["stable"] = out.stab.stable;
  j["spectral_abscissa"] = out.stab.spectral_abscissa;
  j["decay_rate"] = out.stab.decay_rate;
  j["value"] = out.value;
  j["x0"] = json::array();
  for (Eigen::Index i = 0; i < pf.sim.x0.size(); ++i) j["x0"].push_back(pf.sim.x0(i));
  return j;
}

int cmd_solve(const std::string& path, const std::string& gdre_csv) {
  const io::ProblemFile pf = load_with_env(path);

  const auto feas = resolve_candidate(pf);
  if (!feas.feasible) {
    if (pf.p_hat) {
      throw ParseError("p_hat", "supplied candidate fails membership (min eig " +
                                    std::to_string(feas.report.block_min_eig) + ")");
    }
    std::cout << feasibility_json(feas).dump(2) << std::endl;
    return kExitInfeasible;
  }

  riccati::GareSolveOptions opts;
  opts.conv_tol = pf.tolerances.conv_tol;
  opts.max_horizon = pf.horizon.max_horizon;
  opts.step = pf.horizon.step;
  opts.tols = io::integration_tols(pf.tolerances);

  SolveOutput out;
  out.feas = feas;
  out.sol = riccati::solve_gare(pf.model, pf.weights, feas.candidate, opts);

  const Matrix a_cl = pf.model.A + pf.model.B * out.sol.k_gain;
  const Matrix c_cl = pf.model.C + pf.model.D * out.sol.k_gain;
  out.stab = stability::mean_square_stable(a_cl, c_cl);

  const auto shifted = lmi::shifted_weights(pf.model, pf.weights, feas.candidate);
  const SymMatrix q_half = matops::sqrt_psd(shifted.q_shift, pf.tolerances.psd_tol);
  out.assumption_detectable =
      stability::exact_detectable(pf.model.A, pf.model.C, q_half.mat()).detectable;
  if (out.assumption_detectable) {
    out.preserved = stability::detectability_preserved(pf.model, shifted, out.sol.z_bar);
  }
  out.value = pf.sim.x0.dot(out.sol.p_bar.mat() * pf.sim.x0);

  std::cout << solve_json(pf, out).dump(2) << std::endl;

  if (!gdre_csv.empty()) {
    // Terminal value: the file's terminal weight when given, else the
    // candidate the solve ran from. The CSV grid is decimated up front so a
    // long converged horizon does not hold the full solver-resolution grid.
    const SymMatrix terminal =
        pf.weights.terminal ? *pf.weights.terminal : feas.candidate.p_hat;
    const double horizon = std::max(1.0, out.sol.horizon);
    const double csv_step = std::max(pf.horizon.step, horizon / 20000.0);
    const auto gdre = riccati::integrate_gdre(pf.model, pf.weights, terminal,
                                              horizon, csv_step,
                                              io::integration_tols(pf.tolerances));
    std::ofstream csv(gdre_csv, std::ios::binary);
    if (!csv) throw ParseError("--gdre-csv", "cannot open '" + gdre_csv + "'");
    io::write_gdre_csv(csv, gdre);
  }

  return out.stab.stable ? kExitOk : kExitUnstable;
}

int cmd_simulate(const std::string& path, const std::string& gain_mode,
                 const std::string& gain_file, const std::string& out_dir) {
  const io::ProblemFile pf = load_with_env(path);
  std::filesystem::create_directories(out_dir);

  Matrix gain;
  json gain_report;
  std::optional<riccati::GareSolution> sol;
  if (gain_mode == "optimal") {
    const auto feas = resolve_candidate(pf);
    if (!feas.feasible) {
      std::cout << feasibility_json(feas).dump(2) << std::endl;
      return kExitInfeasible;
    }
    riccati::GareSolveOptions opts;
    opts.conv_tol = pf.tolerances.conv_tol;
    opts.max_horizon = pf.horizon.max_horizon;
    opts.step = pf.horizon.step;
    opts.tols = io::integration_tols(pf.tolerances);
    sol = riccati::solve_gare(pf.model, pf.weights, feas.candidate, opts);
    gain = sol->k_gain;
  } else if (gain_mode == "zero") {
    gain = Matrix::Zero(pf.model.input_dim(), pf.model.state_dim());
  } else if (gain_mode == "file") {
    if (gain_file.empty()) throw ParseError("--gain-file", "required with --gain file");
    std::ifstream in(gain_file, std::ios::binary);
    if (!in) throw ParseError("--gain-file", "cannot open '" + gain_file + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError("--gain-file", e.what());
    }
    if (!doc.contains("K")) throw ParseError("--gain-file", "missing field 'K'");
    const json& rows = doc["K"];
    if (!rows.is_array() || rows.empty()) throw ParseError("--gain-file", "'K' must be an array of rows");
    gain.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != static_cast<std::size_t>(gain.cols())) {
        throw ParseError("--gain-file", "'K' rows must have equal length");
      }
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        if (!rows[i][k].is_number()) throw ParseError("--gain-file", "'K' entries must be numbers");
        gain(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            rows[i][k].get<double>();
      }
    }
    if (gain.rows() != pf.model.input_dim() || gain.cols() != pf.model.state_dim()) {
      throw ParseError("--gain-file", "'K' must be m x n");
    }
  } else {
    throw ParseError("--gain", "expected optimal|zero|file, got '" + gain_mode + "'");
  }

  json report;
  report["gain_mode"] = gain_mode;
  report["k"] = matrix_json(gain);
  report["paths"] = pf.sim.paths;
  report["dt"] = pf.sim.dt;
  report["t_end"] = pf.sim.t_end;
  report["seed"] = pf.sim.seed;

  const auto write_report = [&](const json& r) {
    std::ofstream f(std::filesystem::path(out_dir) / "report.json", std::ios::binary);
    f << r.dump(2) << '\n';
  };

  try {
    sim::TrajectoryStats stats;
    if (sol) {
      // Value comparison is only meaningful against a stationary solution.
      const auto cmp = sim::estimate_cost_vs_value(pf.model, pf.weights, gain,
                                                   sol->p_bar, pf.sim);
      stats = cmp.stats;
      report["cost_estimate"] = cmp.cost_estimate;
      report["cost_se"] = cmp.cost_se;
      report["value_target"] = cmp.value_target;
      report["tail_bound"] = cmp.tail_bound;
      report["fitted_decay_rate"] = cmp.fitted_decay_rate;
    } else {
      stats = sim::simulate_closedloop(pf.model, pf.weights,
                                       sim::GainSchedule::constant(gain), pf.sim);
      report["cost_estimate"] = stats.cost_estimate;
      report["cost_se"] = stats.cost_se;
      report["value_target"] = nullptr;
      report["tail_bound"] = nullptr;
    }
    report["diverged"] = false;
    report["blow_up_time"] = nullptr;

    std::ofstream csv(std::filesystem::path(out_dir) / "trajectory.csv",
                      std::ios::binary);
    io::write_trajectory_csv(csv, stats);
    write_report(report);
  } catch (const Divergence& e) {
    report["diverged"] = true;
    if (e.blow_up_time()) {
      report["blow_up_time"] = *e.blow_up_time();
    } else {
      report["blow_up_time"] = nullptr;
    }
    report["error"] = e.what();
    write_report(report);
    std::cout << report.dump(2) << std::endl;
    return kExitDiverged;
  }

  std::cout << report.dump(2) << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indefinite stochastic LQ control: stationary Riccati solver, "
               "LMI feasibility, stability checks, Monte Carlo validation"};
  app.require_subcommand(1);

  std::string problem_path;
  std::string gdre_csv;
  std::string gain_mode = "optimal";
  std::string gain_file;
  std::string out_dir = ".";

  auto* feas = app.add_subcommand("feasible", "Find or verify a feasible candidate");
  feas->add_option("file", problem_path, "problem JSON file")->required();

  auto* solve = app.add_subcommand("solve", "Solve the stationary equation and report "
                                            "the gain, stability and detectability");
  solve->add_option("file", problem_path, "problem JSON file")->required();
  solve->add_option("--gdre-csv", gdre_csv, "write the backward solution as CSV");

  auto* simc = app.add_subcommand("simulate", "Monte Carlo simulation of the closed loop");
  simc->add_option("file", problem_path, "problem JSON file")->required();
  simc->add_option("--gain", gain_mode, "optimal|zero|file")->default_val("optimal");
  simc->add_option("--gain-file", gain_file, "JSON file with field K (rows)");
  simc->add_option("--out", out_dir, "output directory")->default_val(".");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInvalid;
  }

  try {
    if (feas->parsed()) return cmd_feasible(problem_path);
    if (solve->parsed()) return cmd_solve(problem_path, gdre_csv);
    return cmd_simulate(problem_path, gain_mode, gain_file, out_dir);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInvalid;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInvalid;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitNonConvergence;
  } catch (const Divergence& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitDiverged;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInvalid;
  }
}
