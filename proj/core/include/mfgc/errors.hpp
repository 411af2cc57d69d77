#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfgc {

enum class ErrorKind {
  Domain,
  NoConvergence,
  SingularHessian,
  IntegrationBlowup,
  GridMismatch,
  InvalidArgument,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Library-wide exception. The kind maps to the failure classes named in the
// public contracts; the message is free text for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Same kind, message prefixed with context (e.g. "particle 12: ").
  Error with_context(std::string_view context) const {
    return Error(kind_, std::string(context) + what());
  }

 private:
  ErrorKind kind_;
};

inline Error domain_error(const std::string& m) { return {ErrorKind::Domain, m}; }
inline Error no_convergence(const std::string& m) { return {ErrorKind::NoConvergence, m}; }
inline Error singular_hessian(const std::string& m) { return {ErrorKind::SingularHessian, m}; }
inline Error invalid_argument(const std::string& m) { return {ErrorKind::InvalidArgument, m}; }

}  // namespace mfgc
