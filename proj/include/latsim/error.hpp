#ifndef LATSIM_ERROR_HPP_
#define LATSIM_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace latsim {

enum class ErrorCode {
  // configuration / usage
  Usage,
  ConfigInvalid,
  // data
  IoError,
  MalformedRow,
  NonMonotonicTimestamps,
  NonPositivePrice,
  SeriesTooShort,
  HttpError,
  GapDetected,
  EmptyBatch,
  EmptyLatentList,
  DimensionMismatch,
  ShapeMismatch,
  LengthMismatch,
  MissingSeries,
  BlockTooShort,
  SpecInvalid,
  InvalidRho,
  CheckpointInvalid,
  // numerical
  NonFiniteLoss,
  SingularDesign,
  ConstantRegressor,
  DegenerateInput,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::GapDetected: return "GapDetected";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyLatentList: return "EmptyLatentList";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingSeries: return "MissingSeries";
    case ErrorCode::BlockTooShort: return "BlockTooShort";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::CheckpointInvalid: return "CheckpointInvalid";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::ConstantRegressor: return "ConstantRegressor";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
  }
  return "Unknown";
}

// Process exit status for a failure of this kind: 1 usage/config, 2 data,
// 3 numerical.
inline int exit_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::Usage:
    case ErrorCode::ConfigInvalid:
      return 1;
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::SingularDesign:
    case ErrorCode::ConstantRegressor:
    case ErrorCode::DegenerateInput:
      return 3;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace latsim

#endif  // LATSIM_ERROR_HPP_
