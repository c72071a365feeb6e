#ifndef OFFGRID_ERROR_HPP
#define OFFGRID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace offgrid {

enum class ErrorKind {
  Domain,          // argument outside its mathematical domain
  Precondition,    // caller violated a stated precondition
  Size,            // index set too small for the requested operation
  InvalidModel,    // duplicate frequencies, zero coefficients, bad mask
  IllPosed,        // rank deficient / badly conditioned linear system
  ModelOrder,      // fewer significant singular values than requested
  NonUnique,       // decomposition exists but is not unique
  StaleDual,       // dual requested from a non-converged solve
  NonIsolated,     // dual polynomial saturates on a non-isolated set
  Singular,        // certificate system not invertible
  Config,          // bad experiment / CLI configuration
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Size: return "size";
    case ErrorKind::InvalidModel: return "invalid-model";
    case ErrorKind::IllPosed: return "ill-posed";
    case ErrorKind::ModelOrder: return "model-order";
    case ErrorKind::NonUnique: return "non-unique";
    case ErrorKind::StaleDual: return "stale-dual";
    case ErrorKind::NonIsolated: return "non-isolated";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace offgrid

#endif
