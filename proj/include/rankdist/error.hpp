#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rankdist {

enum class ErrorCode {
  NonPositiveShare,
  NotDescending,
  BadNormalization,
  NonIntegerBoundary,
  BadBrackets,
  BadAlphaSum,
  BadSigma,
  Unstable,
  TiedShares,
  NotDivergent,
  GroupUnstable,
  NegativeInput,
  FitFailed,
  InfeasibleTarget,
  UnknownScenario,
  NonPositiveKappa,
  Overflow,
  DimensionMismatch,
  BadConfig,
  ParseError,
  BracketGap,
  BadSum,
  Io,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveShare: return "NonPositiveShare";
    case ErrorCode::NotDescending: return "NotDescending";
    case ErrorCode::BadNormalization: return "BadNormalization";
    case ErrorCode::NonIntegerBoundary: return "NonIntegerBoundary";
    case ErrorCode::BadBrackets: return "BadBrackets";
    case ErrorCode::BadAlphaSum: return "BadAlphaSum";
    case ErrorCode::BadSigma: return "BadSigma";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::TiedShares: return "TiedShares";
    case ErrorCode::NotDivergent: return "NotDivergent";
    case ErrorCode::GroupUnstable: return "GroupUnstable";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::NonPositiveKappa: return "NonPositiveKappa";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BracketGap: return "BracketGap";
    case ErrorCode::BadSum: return "BadSum";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Error raised by every rankdist operation.
///
/// `rank()` carries the 1-indexed household rank the error refers to when
/// there is one (first violating prefix, first tie, ...). `line()` carries
/// the 1-indexed input line for parse errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> rank = std::nullopt,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what),
        rank_(rank),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> rank() const noexcept { return rank_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> rank_;
  std::optional<std::size_t> line_;
};

}  // namespace rankdist
