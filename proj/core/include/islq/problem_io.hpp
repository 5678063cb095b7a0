#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "islq/riccati.hpp"
#include "islq/simulate.hpp"
#include "islq/types.hpp"

// The JSON problem-file format shared by the CLI and tests, plus the CSV /
// report emitters. Matrices serialize as arrays of row arrays; numbers are
// written shortest-round-trip so a re-parse reproduces the doubles exactly.
namespace islq::io {

struct Tolerances {
  double psd_tol = 1e-8;
  double reg_tol = 1e-7;
  double rank_tol = matops::kAutoRankTol;  // auto unless the file pins one
  double conv_tol = 1e-9;
};

struct HorizonControls {
  double max_horizon = 6400.0;
  double step = 1e-3;
};

struct ProblemFile {
  SystemModel model;
  CostWeights weights;
  std::optional<SymMatrix> p_hat;
  sim::SimConfig sim;
  Tolerances tolerances;
  HorizonControls horizon;
};

/// Parse / validate. Throws ParseError naming the offending field.
ProblemFile parse_problem(const std::string& json_text);
ProblemFile load_problem(const std::string& path);

/// Inverse of parse_problem: the emitted document re-parses to an identical
/// in-memory problem.
std::string problem_to_json(const ProblemFile& problem);

/// CSV with the exact header `t,mean_sq,mean_sq_se,u0`, one row per grid
/// stamp, shortest-round-trip decimals, '\n'-terminated rows.
void write_trajectory_csv(std::ostream& out, const sim::TrajectoryStats& stats);

/// CSV time series of a backward Riccati solution, decimated to at most
/// max_rows rows: t, row-major P entries, row-major gain entries, and the
/// per-stamp constraint diagnostics.
void write_gdre_csv(std::ostream& out, const riccati::GdreSolution& sol,
                    std::size_t max_rows = 20000);

riccati::IntegrationTols integration_tols(const Tolerances& t);

}  // namespace islq::io
