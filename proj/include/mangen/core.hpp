#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mangen {

enum class ErrorKind {
  EnvelopeViolation,
  NumericalDivergence,
  TrimNotFound,
  InvalidArgument,
  UnknownManeuver,
  InversionSingular,
  ExpertDiverged,
  ShapeMismatch,
  IoError,
  SpecMismatch,
  CorruptCheckpoint,
  InconsistentDt,
  EmptyDemos,
  DemoTooShort,
  AllCandidatesUnstable,
  BudgetExhausted,
  InsufficientFill,
  LengthMismatch,
  ConfigError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EnvelopeViolation: return "EnvelopeViolation";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::TrimNotFound: return "TrimNotFound";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownManeuver: return "UnknownManeuver";
    case ErrorKind::InversionSingular: return "InversionSingular";
    case ErrorKind::ExpertDiverged: return "ExpertDiverged";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::InconsistentDt: return "InconsistentDt";
    case ErrorKind::EmptyDemos: return "EmptyDemos";
    case ErrorKind::DemoTooShort: return "DemoTooShort";
    case ErrorKind::AllCandidatesUnstable: return "AllCandidatesUnstable";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::InsufficientFill: return "InsufficientFill";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Library-wide exception; `kind()` identifies the failure class so callers
/// can branch without parsing messages.
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

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

/// 64-bit FNV-1a; stable across platforms, used for spec hashes.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mangen
