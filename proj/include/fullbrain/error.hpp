#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fullbrain {

enum class ErrorCode {
  DuplicateId,
  EmptyName,
  MissingEndpoint,
  SelfLoop,
  DuplicateEdge,
  UnknownId,
  ParseError,
  ReferentialError,
  EmptyGraph,
  InvalidK,
  OutOfRangeInput,
  UnknownUser,
  EmptyQuery,
  NonMonotonicTimestamp,
  UnknownEntity,
  UnknownAction,
  NotOwner,
  UnknownActivity,
  AlreadyDeleted,
  NoData,
  BindError,
  DataLoadError,
  InfeasibleCounts,
  ServiceUnreachable,
  PartialFailure,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::MissingEndpoint: return "MissingEndpoint";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ReferentialError: return "ReferentialError";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::OutOfRangeInput: return "OutOfRangeInput";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::UnknownAction: return "UnknownAction";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::UnknownActivity: return "UnknownActivity";
    case ErrorCode::AlreadyDeleted: return "AlreadyDeleted";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::DataLoadError: return "DataLoadError";
    case ErrorCode::InfeasibleCounts: return "InfeasibleCounts";
    case ErrorCode::ServiceUnreachable: return "ServiceUnreachable";
    case ErrorCode::PartialFailure: return "PartialFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Every module reports failures through this exception. `line` is set for
// errors raised while reading line-oriented files.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code and line prefix.
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& message,
                            std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += " (line " + std::to_string(*line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::string message_;
};

}  // namespace fullbrain
