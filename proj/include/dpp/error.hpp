#pragma once

#include <stdexcept>
#include <string>

namespace dpp {

enum class ErrorKind {
  Domain,
  InvalidModel,
  UnsupportedClosedForm,
  UnsupportedFamily,
  NonStrictEigenvalue,
  NonPositiveDefinite,
  GridTooCoarse,
  NumericalBreakdown,
  EnvelopeViolation,
  NonInvertibleMap,
  ZeroIntensity,
  EmptyPattern,
  TooFewPoints,
  EmptyBin,
  MixedMethods,
  NoConvergence,
  Parse,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return "Domain";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::UnsupportedClosedForm: return "UnsupportedClosedForm";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::NonStrictEigenvalue: return "NonStrictEigenvalue";
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::EnvelopeViolation: return "EnvelopeViolation";
    case ErrorKind::NonInvertibleMap: return "NonInvertibleMap";
    case ErrorKind::ZeroIntensity: return "ZeroIntensity";
    case ErrorKind::EmptyPattern: return "EmptyPattern";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::EmptyBin: return "EmptyBin";
    case ErrorKind::MixedMethods: return "MixedMethods";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dpp
