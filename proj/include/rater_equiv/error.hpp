#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rater_equiv {

enum class ErrorCode {
  kParse,
  kRange,
  kConflict,
  kMissingData,
  kInsufficientData,
  kInsufficientAgreement,
  kUndefined,
  kShape,
  kParameter,
  kCoverage,
  kModality,
  kTransport,
  kGate,
  kSchema,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kConflict: return "conflict error";
    case ErrorCode::kMissingData: return "missing-data error";
    case ErrorCode::kInsufficientData: return "insufficient-data error";
    case ErrorCode::kInsufficientAgreement: return "insufficient-agreement error";
    case ErrorCode::kUndefined: return "undefined-statistic error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kCoverage: return "coverage error";
    case ErrorCode::kModality: return "modality error";
    case ErrorCode::kTransport: return "transport error";
    case ErrorCode::kGate: return "gate error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

// All library failures surface as this type; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Re-throws with extra context prepended, keeping the original code.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  throw Error(e.code(), context + ": " + e.detail());
}

}  // namespace rater_equiv
