#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace llmrerank {

enum class ErrorCode {
  // ingest
  MissingFile,
  MalformedRow,
  EmptyTitle,
  NoHistory,
  // candgen
  CatalogTooSmall,
  UnknownUser,
  NonFiniteLoss,
  // llm client
  Timeout,
  HttpStatus,
  ExhaustedRetries,
  MissingApiKey,
  Transport,
  // rerank
  UnknownItem,
  UnparseableOutput,
  EmptyOutputs,
  SlateMismatch,
  AllBootstrapsFailed,
  // datasetgen
  GenerationOrderDrift,
  IoError,
  // metrics / stats
  MissingRelevance,
  ZeroVariance,
  LengthMismatch,
  UserSetMismatch,
  // generic
  InvalidArgument,
  Config,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure the library reports. The code is the contract; the message
/// is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t detail = 0);

  ErrorCode code() const noexcept { return code_; }

  /// 1-based line number for MalformedRow, HTTP status for HttpStatus, else 0.
  std::size_t detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::size_t detail_ = 0;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message, std::size_t detail = 0);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::InvalidArgument, message);
}

}  // namespace llmrerank
