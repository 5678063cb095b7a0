#include "islq/problem_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace islq::io {

namespace {

using nlohmann::json;

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError(field, "expected a number");
  return j.get<double>();
}

Matrix parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ParseError(field, "expected a nonempty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.empty()) {
      throw ParseError(field, "row " + std::to_string(i) + " is not a nonempty array");
    }
    if (i == 0) {
      cols = row.size();
      out.resize(rows, cols);
    } else if (row.size() != cols) {
      throw ParseError(field, "row " + std::to_string(i) + " has " +
                                  std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(cols));
    }
    for (std::size_t k = 0; k < cols; ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          get_number(row[k], field + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
  }
  return out;
}

Vector parse_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ParseError(field, "expected a nonempty array");
  Vector out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) =
        get_number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

const json& require(const json& j, const std::string& key, const std::string& scope) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(scope + key, "missing");
  return *it;
}

SymMatrix parse_sym(const json& j, const std::string& field) {
  const Matrix m = parse_matrix(j, field);
  if (m.rows() != m.cols()) throw ParseError(field, "must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw ParseError(field, "must be symmetric");
  }
  return SymMatrix(m);
}

double positive(const json& j, const std::string& field) {
  const double v = get_number(j, field);
  if (v <= 0.0) throw ParseError(field, "must be > 0");
  return v;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ProblemFile parse_problem(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  if (!doc.is_object()) throw ParseError("<document>", "expected a JSON object");

  const json& jm = require(doc, "model", "");
  Matrix a = parse_matrix(require(jm, "A", "model."), "model.A");
  Matrix b = parse_matrix(require(jm, "B", "model."), "model.B");
  Matrix c = parse_matrix(require(jm, "C", "model."), "model.C");
  Matrix d = parse_matrix(require(jm, "D", "model."), "model.D");
  if (a.rows() != a.cols()) throw ParseError("model.A", "must be square");
  if (c.rows() != a.rows() || c.cols() != a.cols())
    throw ParseError("model.C", "must match A's shape");
  if (b.rows() != a.rows()) throw ParseError("model.B", "row count must match A");
  if (d.rows() != b.rows() || d.cols() != b.cols())
    throw ParseError("model.D", "must match B's shape");
  SystemModel model(std::move(a), std::move(b), std::move(c), std::move(d));

  const json& jw = require(doc, "weights", "");
  CostWeights weights{parse_sym(require(jw, "Q", "weights."), "weights.Q"),
                      parse_sym(require(jw, "R", "weights."), "weights.R"),
                      std::nullopt};
  if (jw.contains("P_T")) {
    weights.terminal = parse_sym(jw["P_T"], "weights.P_T");
  }
  if (weights.Q.dim() != model.state_dim()) throw ParseError("weights.Q", "must be n x n");
  if (weights.R.dim() != model.input_dim()) throw ParseError("weights.R", "must be m x m");
  if (weights.terminal && weights.terminal->dim() != model.state_dim()) {
    throw ParseError("weights.P_T", "must be n x n");
  }

  std::optional<SymMatrix> p_hat;
  if (doc.contains("p_hat")) {
    p_hat = parse_sym(doc["p_hat"], "p_hat");
    if (p_hat->dim() != model.state_dim()) throw ParseError("p_hat", "must be n x n");
  }

  const json& js = require(doc, "sim", "");
  sim::SimConfig sim_cfg;
  sim_cfg.dt = positive(require(js, "dt", "sim."), "sim.dt");
  sim_cfg.t_end = positive(require(js, "t_end", "sim."), "sim.t_end");
  if (sim_cfg.t_end < sim_cfg.dt) throw ParseError("sim.t_end", "must be >= sim.dt");
  const json& jp = require(js, "paths", "sim.");
  if (!jp.is_number_integer() || jp.get<long>() < 1) {
    throw ParseError("sim.paths", "must be a positive integer");
  }
  sim_cfg.paths = jp.get<long>();
  const json& jseed = require(js, "seed", "sim.");
  if (!jseed.is_number_unsigned() && !jseed.is_number_integer()) {
    throw ParseError("sim.seed", "must be a nonnegative integer");
  }
  if (jseed.is_number_integer() && jseed.get<long long>() < 0) {
    throw ParseError("sim.seed", "must be a nonnegative integer");
  }
  sim_cfg.seed = jseed.get<std::uint64_t>();
  sim_cfg.x0 = parse_vector(require(js, "x0", "sim."), "sim.x0");
  if (sim_cfg.x0.size() != model.state_dim()) {
    throw ParseError("sim.x0", "must have length n");
  }

  Tolerances tols;
  if (doc.contains("tolerances")) {
    const json& jt = doc["tolerances"];
    if (jt.contains("psd_tol")) tols.psd_tol = positive(jt["psd_tol"], "tolerances.psd_tol");
    if (jt.contains("reg_tol")) tols.reg_tol = positive(jt["reg_tol"], "tolerances.reg_tol");
    if (jt.contains("rank_tol")) tols.rank_tol = positive(jt["rank_tol"], "tolerances.rank_tol");
    if (jt.contains("conv_tol")) tols.conv_tol = positive(jt["conv_tol"], "tolerances.conv_tol");
  }

  HorizonControls horizon;
  if (doc.contains("horizon")) {
    const json& jh = doc["horizon"];
    if (jh.contains("max")) horizon.max_horizon = positive(jh["max"], "horizon.max");
    if (jh.contains("step")) horizon.step = positive(jh["step"], "horizon.step");
  }

  return ProblemFile{std::move(model), std::move(weights), std::move(p_hat),
                     std::move(sim_cfg), tols, horizon};
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("<file>", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str());
}

std::string problem_to_json(const ProblemFile& problem) {
  json doc;
  doc["model"]["A"] = matrix_json(problem.model.A);
  doc["model"]["B"] = matrix_json(problem.model.B);
  doc["model"]["C"] = matrix_json(problem.model.C);
  doc["model"]["D"] = matrix_json(problem.model.D);
  doc["weights"]["Q"] = matrix_json(problem.weights.Q.mat());
  doc["weights"]["R"] = matrix_json(problem.weights.R.mat());
  if (problem.weights.terminal) {
    doc["weights"]["P_T"] = matrix_json(problem.weights.terminal->mat());
  }
  if (problem.p_hat) doc["p_hat"] = matrix_json(problem.p_hat->mat());
  doc["sim"]["dt"] = problem.sim.dt;
  doc["sim"]["t_end"] = problem.sim.t_end;
  doc["sim"]["paths"] = problem.sim.paths;
  doc["sim"]["seed"] = problem.sim.seed;
  json x0 = json::array();
  for (Eigen::Index i = 0; i < problem.sim.x0.size(); ++i) x0.push_back(problem.sim.x0(i));
  doc["sim"]["x0"] = std::move(x0);
  doc["tolerances"]["psd_tol"] = problem.tolerances.psd_tol;
  doc["tolerances"]["reg_tol"] = problem.tolerances.reg_tol;
  if (problem.tolerances.rank_tol != matops::kAutoRankTol) {
    doc["tolerances"]["rank_tol"] = problem.tolerances.rank_tol;
  }
  doc["tolerances"]["conv_tol"] = problem.tolerances.conv_tol;
  doc["horizon"]["max"] = problem.horizon.max_horizon;
  doc["horizon"]["step"] = problem.horizon.step;
  return doc.dump(2);
}

void write_trajectory_csv(std::ostream& out, const sim::TrajectoryStats& stats) {
  out << "t,mean_sq,mean_sq_se,u0\n";
  for (std::size_t k = 0; k < stats.grid.size(); ++k) {
    out << shortest(stats.grid[k]) << ',' << shortest(stats.mean_sq[k]) << ','
        << shortest(stats.mean_sq_se[k]) << ',' << shortest(stats.control_sample[k])
        << '\n';
  }
}

void write_gdre_csv(std::ostream& out, const riccati::GdreSolution& sol,
                    std::size_t max_rows) {
  if (sol.grid.empty()) return;
  const auto n = sol.p_of_t.front().dim();
  const auto m = sol.k_of_t.front().rows();

  out << 't';
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out << ",p_" << i << '_' << j;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out << ",k_" << i << '_' << j;
  out << ",omega_min_eig,reg_defect\n";

  const std::size_t stride = std::max<std::size_t>(1, sol.grid.size() / max_rows);
  for (std::size_t k = 0; k < sol.grid.size(); k += stride) {
    out << shortest(sol.grid[k]);
    const Matrix& p = sol.p_of_t[k].mat();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out << ',' << shortest(p(i, j));
    const Matrix& kg = sol.k_of_t[k];
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out << ',' << shortest(kg(i, j));
    out << ',' << shortest(sol.constraint_log[k].omega_min_eig) << ','
        << shortest(sol.constraint_log[k].regularity_defect) << '\n';
  }
}

riccati::IntegrationTols integration_tols(const Tolerances& t) {
  riccati::IntegrationTols out;
  out.psd_tol = t.psd_tol;
  out.reg_tol = t.reg_tol;
  out.rank_tol = t.rank_tol;
  return out;
}

}  // namespace islq::io
