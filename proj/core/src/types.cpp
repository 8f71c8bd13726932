#include "mfg/types.hpp"

namespace mfg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::WrongFamily: return "WrongFamily";
    case ErrorCode::NonConvexMinimization: return "NonConvexMinimization";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SingularRegression: return "SingularRegression";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::HomotopyStall: return "HomotopyStall";
    case ErrorCode::FlowNoConvergence: return "FlowNoConvergence";
    case ErrorCode::StreamExhausted: return "StreamExhausted";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::ConditionFailed: return "ConditionFailed";
    case ErrorCode::StudyAborted: return "StudyAborted";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

void Dimensions::validate() const {
  if (n < 1 || d < 1 || k < 1) {
    throw MfgError(ErrorCode::InvalidParams, "dimensions must be strictly positive");
  }
  if (n > kMaxDim || d > kMaxDim || k > kMaxDim) {
    throw MfgError(ErrorCode::InvalidParams,
                   "dimensions above " + std::to_string(kMaxDim) + " are not supported");
  }
}

}  // namespace mfg
