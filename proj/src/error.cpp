#include "llmrerank/error.hpp"

namespace llmrerank {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyTitle: return "EmptyTitle";
    case ErrorCode::NoHistory: return "NoHistory";
    case ErrorCode::CatalogTooSmall: return "CatalogTooSmall";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::MissingApiKey: return "MissingApiKey";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::UnparseableOutput: return "UnparseableOutput";
    case ErrorCode::EmptyOutputs: return "EmptyOutputs";
    case ErrorCode::SlateMismatch: return "SlateMismatch";
    case ErrorCode::AllBootstrapsFailed: return "AllBootstrapsFailed";
    case ErrorCode::GenerationOrderDrift: return "GenerationOrderDrift";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingRelevance: return "MissingRelevance";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UserSetMismatch: return "UserSetMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::size_t detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(detail) {}

void fail(ErrorCode code, const std::string& message, std::size_t detail) {
  throw Error(code, message, detail);
}

}  // namespace llmrerank
