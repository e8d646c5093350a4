#ifndef GPCPD_ERROR_HPP
#define GPCPD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gpcpd {

/// Broad failure category; the CLI maps it onto a process exit code.
enum class ErrorCategory { Validation, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

struct DimensionMismatch : ValidationError {
  explicit DimensionMismatch(const std::string& what) : ValidationError("dimension mismatch: " + what) {}
};

struct CandidateOutOfRange : ValidationError {
  explicit CandidateOutOfRange(const std::string& what)
      : ValidationError("candidate out of range: " + what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::Numerical, what) {}
};

struct NotPositiveDefinite : NumericalError {
  explicit NotPositiveDefinite(const std::string& what)
      : NumericalError("matrix not positive definite: " + what) {}
};

struct ConvergenceFailure : NumericalError {
  explicit ConvergenceFailure(const std::string& what)
      : NumericalError("no convergence: " + what) {}
};

struct NoPositiveRoot : NumericalError {
  explicit NoPositiveRoot(const std::string& what) : NumericalError("no positive root: " + what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

}  // namespace gpcpd

#endif
