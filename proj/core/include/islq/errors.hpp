#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace islq {

/// Base class for everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an interface contract (dimension mismatch, bad option value,
/// unmet precondition).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A dense eigen/SVD backend failed to converge. Carries the offending matrix
/// so callers can dump it for post-mortem.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, Eigen::MatrixXd offending)
      : Error(what), offending_(std::move(offending)) {}
  const Eigen::MatrixXd& offending() const noexcept { return offending_; }

 private:
  Eigen::MatrixXd offending_;
};

/// An input required to be positive semi-definite was not; carries the
/// violating eigenvalue.
class NotPsd : public Error {
 public:
  NotPsd(const std::string& what, double violating_eigenvalue)
      : Error(what), violating_eigenvalue_(violating_eigenvalue) {}
  double violating_eigenvalue() const noexcept { return violating_eigenvalue_; }

 private:
  double violating_eigenvalue_;
};

/// Constraint failure during backward Riccati integration: the semidefiniteness
/// or range (regularity) condition stopped holding at some grid time.
class RiccatiBreakdown : public Error {
 public:
  RiccatiBreakdown(const std::string& what, double time, double omega_min_eig,
                   double regularity_defect)
      : Error(what),
        time_(time),
        omega_min_eig_(omega_min_eig),
        regularity_defect_(regularity_defect) {}
  double time() const noexcept { return time_; }
  double omega_min_eig() const noexcept { return omega_min_eig_; }
  double regularity_defect() const noexcept { return regularity_defect_; }

 private:
  double time_;
  double omega_min_eig_;
  double regularity_defect_;
};

class GdreBreakdown : public RiccatiBreakdown {
 public:
  using RiccatiBreakdown::RiccatiBreakdown;
};

class SdreBreakdown : public RiccatiBreakdown {
 public:
  using RiccatiBreakdown::RiccatiBreakdown;
};

/// Stationary solve did not converge within the horizon budget. For a
/// stabilizable problem with a nonempty candidate set this does not happen,
/// so nonconvergence doubles as a stabilizability counter-signal.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double horizon, double last_delta)
      : Error(what), horizon_(horizon), last_delta_(last_delta) {}
  double horizon() const noexcept { return horizon_; }
  double last_delta() const noexcept { return last_delta_; }

 private:
  double horizon_;
  double last_delta_;
};

/// Simulated state left the trust region (norm above 1e12), or a closed loop
/// required to be stable was not. blow_up_time is empty for the latter.
class Divergence : public Error {
 public:
  explicit Divergence(const std::string& what,
                      std::optional<double> blow_up_time = std::nullopt)
      : Error(what), blow_up_time_(blow_up_time) {}
  std::optional<double> blow_up_time() const noexcept { return blow_up_time_; }

 private:
  std::optional<double> blow_up_time_;
};

/// Two quantities that must agree by construction did not (e.g. a matrix
/// passed as a stationary solution fails its own equation).
class Inconsistency : public Error {
 public:
  using Error::Error;
};

/// Problem-file parsing or validation failure; names the offending field.
class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace islq
