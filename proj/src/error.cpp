#include "prefixevo/error.hpp"

namespace prefixevo {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::InvalidPrefix: return "InvalidPrefix";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::BadResponse: return "BadResponse";
    case ErrorCode::SeedShortfall: return "SeedShortfall";
    case ErrorCode::WrongChildCount: return "WrongChildCount";
    case ErrorCode::UnevaluatedMember: return "UnevaluatedMember";
    case ErrorCode::NTooLarge: return "NTooLarge";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingJudge: return "MissingJudge";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::DegenerateAgreement: return "DegenerateAgreement";
    case ErrorCode::TestAlreadyConsumed: return "TestAlreadyConsumed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
  }
  return "Unknown";
}

WrongChildCount::WrongChildCount(int expected, int found)
    : Error(ErrorCode::WrongChildCount,
            "expected " + std::to_string(expected) + " think blocks, found " +
                std::to_string(found)),
      expected_(expected),
      found_(found) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace prefixevo
