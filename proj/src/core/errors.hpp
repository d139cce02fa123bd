#pragma once

#include <stdexcept>
#include <string>

namespace fcirk {

enum class ErrorCode {
  kDomain,
  kParse,
  kUnit,
  kSingularity,
  kSolver,
  kNonConvergence,
  kNormalization,
  kInvalidArgument,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorCode::kDomain, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what)
      : Error(ErrorCode::kParse, what) {}
};

class UnitError : public Error {
 public:
  explicit UnitError(const std::string& what)
      : Error(ErrorCode::kUnit, what) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what)
      : Error(ErrorCode::kSingularity, what) {}
};

// Universal-anomaly solver failure. Carries the last iterate and residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_iterate, double residual,
              int iterations)
      : Error(ErrorCode::kSolver, what),
        last_iterate_(last_iterate),
        residual_(residual),
        iterations_(iterations) {}

  double last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_iterate_;
  double residual_;
  int iterations_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double last_residual,
                      int sweeps)
      : Error(ErrorCode::kNonConvergence, what),
        last_residual_(last_residual),
        sweeps_(sweeps) {}

  double last_residual() const noexcept { return last_residual_; }
  int sweeps() const noexcept { return sweeps_; }

 private:
  double last_residual_;
  int sweeps_;
};

class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& what)
      : Error(ErrorCode::kNormalization, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::kInvalidArgument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

// Raised by drivers when a step fails; remembers where the run got to.
class StepFailure : public Error {
 public:
  StepFailure(ErrorCode cause, const std::string& what,
              double last_good_time, long long last_good_step)
      : Error(cause, what),
        last_good_time_(last_good_time),
        last_good_step_(last_good_step) {}

  double last_good_time() const noexcept { return last_good_time_; }
  long long last_good_step() const noexcept { return last_good_step_; }

 private:
  double last_good_time_;
  long long last_good_step_;
};

}  // namespace fcirk
