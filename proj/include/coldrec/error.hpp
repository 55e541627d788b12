#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coldrec {

enum class ErrorCode {
  // catalog
  MissingFile,
  MalformedRow,
  DuplicateItemId,
  UnknownItemId,
  NoWarmItems,
  EmptyLog,
  // taskgen
  InsufficientWarmCandidates,
  InsufficientColdCandidates,
  UserNotInMode,
  // gateway
  TransportError,
  BadStatus,
  EmptyChoice,
  UnknownTag,
  // strategies
  MissingTemplate,
  ContextOverflow,
  UnknownPlaceholder,
  // scoring
  NegativeWeight,
  DimensionMismatch,
  EmptyEvalSet,
  ZeroBaseline,
  // curation / io
  IoError,
  // cli
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Row-level failure; line numbers are 1-based and count the header.
class MalformedRowError : public Error {
 public:
  MalformedRowError(std::size_t line, const std::string& detail)
      : Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": " + detail),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CountError : public Error {
 public:
  CountError(ErrorCode code, std::size_t available, const std::string& detail)
      : Error(code, detail + " (available " + std::to_string(available) + ")"),
        available_(available) {}

  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t available_;
};

class BadStatusError : public Error {
 public:
  BadStatusError(int status, const std::string& detail)
      : Error(ErrorCode::BadStatus, "HTTP " + std::to_string(status) + ": " + detail),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace coldrec
