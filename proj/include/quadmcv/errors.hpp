#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace quadmcv {

/// Failure classes surfaced to the command line as distinct exit codes.
enum class ErrorKind {
  Config = 2,
  Solver = 3,
  Divergence = 4,
  Io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(ErrorKind::Solver, what) {}
};

// Wind

class InvalidModelError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class OutOfRangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Trajectory

class DegenerateWaypointsError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Dynamics

class DegenerateQuaternionError : public SolverError {
 public:
  using SolverError::SolverError;
};

class SingularLinearizationError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Riccati

class InstabilityError : public SolverError {
 public:
  InstabilityError(const std::string& what, double max_real_part)
      : SolverError(what), max_real_part_(max_real_part) {}
  double max_real_part() const noexcept { return max_real_part_; }

 private:
  double max_real_part_;
};

class UnstabilizableError : public SolverError {
 public:
  using SolverError::SolverError;
};

class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : SolverError(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

class NumericalError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Non-finite values in a backward Riccati sweep; `time` is where it happened.
class HorizonError : public SolverError {
 public:
  HorizonError(const std::string& what, double time) : SolverError(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// Simulation

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what, double time = 0.0)
      : Error(ErrorKind::Divergence, what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace quadmcv
