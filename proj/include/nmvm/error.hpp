#pragma once

#include <stdexcept>
#include <string>

namespace nmvm {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Domain,               // argument outside a function's supported domain
  Parse,                // malformed input file
  Validation,           // well-formed input violating a model invariant
  MomentNotFinite,      // E[Θ^l] requested beyond the mixing law's finite moments
  TailUnderflow,        // tail probability too small to condition on
  DegenerateAggregate,  // w'Σw <= 0
  NonPositiveTCM,       // k-th root of a non-positive tail central moment
  FactorisationFailure, // Σ has no real square root
  EmptyTail,            // no Monte Carlo draw above the empirical threshold
  InsufficientData,
  NonPositivePrice,
  Convergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::MomentNotFinite: return "MomentNotFinite";
    case ErrorKind::TailUnderflow: return "TailUnderflow";
    case ErrorKind::DegenerateAggregate: return "DegenerateAggregate";
    case ErrorKind::NonPositiveTCM: return "NonPositiveTCM";
    case ErrorKind::FactorisationFailure: return "FactorisationFailure";
    case ErrorKind::EmptyTail: return "EmptyTail";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NonPositivePrice: return "NonPositivePrice";
    case ErrorKind::Convergence: return "ConvergenceFailure";
  }
  return "Error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace nmvm
