#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefixevo {

/// Stable error identifiers. The CLI prints `code_name()` so scripts can match on it.
enum class ErrorCode {
  TemplateError,
  InvalidPrefix,
  InvalidSpec,
  BackendUnavailable,
  AuthError,
  ContextOverflow,
  BadResponse,
  SeedShortfall,
  WrongChildCount,
  UnevaluatedMember,
  NTooLarge,
  DomainError,
  LengthMismatch,
  MissingJudge,
  MissingField,
  UnparseableVerdict,
  TooFewRecords,
  DegenerateAgreement,
  TestAlreadyConsumed,
  ConfigError,
  DatasetError,
  IoError,
  ReplayMismatch,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by operator parsers when the number of think blocks differs from the contract.
class WrongChildCount : public Error {
 public:
  WrongChildCount(int expected, int found);

  int expected() const noexcept { return expected_; }
  int found() const noexcept { return found_; }

 private:
  int expected_;
  int found_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace prefixevo
