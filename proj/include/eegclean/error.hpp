#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eegclean {

enum class ErrorCode {
  MissingFile,
  Unwritable,
  NonNumeric,
  NonFiniteSample,
  ChannelMismatch,
  LengthMismatch,
  OutOfRange,
  ZeroOverlap,
  EmptyDataset,
  PatternNotFound,
  ShapeMismatch,
  InvalidArgument,
  RankDeficient,
  ZeroVariance,
  UnstableFilter,
  NonFiniteLoss,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::Unwritable: return "Unwritable";
    case ErrorCode::NonNumeric: return "NonNumeric";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ZeroOverlap: return "ZeroOverlap";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::PatternNotFound: return "PatternNotFound";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnstableFilter: return "UnstableFilter";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Process exit status used by the command-line tool for each error class.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient:
    case ErrorCode::ZeroVariance:
    case ErrorCode::UnstableFilter:
    case ErrorCode::NonFiniteLoss:
      return 3;
    case ErrorCode::InvalidConfig:
      return 4;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eegclean
