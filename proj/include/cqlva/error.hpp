#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cqlva {

enum class ErrorCode {
  NegativeDimension,
  NonFiniteValue,
  EmptyFeatureVector,
  IllegalColumnKind,
  UnknownColumn,
  DimensionMismatch,
  ZeroVector,
  EmptyRow,
  NonpositiveSizeOrHop,
  SyntaxError,
  UnknownIdentifier,
  SchemaMismatch,
  ConfigError,
  QueueStall,
  ParseError,
  OutOfOrderFrame,
  EmptyConfusion,
  PairOutsideUniverse,
  IndexMismatch,
  FormatMismatch,
  SpecError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeDimension: return "NEGATIVE_DIMENSION";
    case ErrorCode::NonFiniteValue: return "NON_FINITE_VALUE";
    case ErrorCode::EmptyFeatureVector: return "EMPTY_FEATURE_VECTOR";
    case ErrorCode::IllegalColumnKind: return "ILLEGAL_COLUMN_KIND";
    case ErrorCode::UnknownColumn: return "UNKNOWN_COLUMN";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::ZeroVector: return "ZERO_VECTOR";
    case ErrorCode::EmptyRow: return "EMPTY_ROW";
    case ErrorCode::NonpositiveSizeOrHop: return "NONPOSITIVE_SIZE_OR_HOP";
    case ErrorCode::SyntaxError: return "SYNTAX_ERROR";
    case ErrorCode::UnknownIdentifier: return "UNKNOWN_IDENTIFIER";
    case ErrorCode::SchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
    case ErrorCode::QueueStall: return "QUEUE_STALL";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::OutOfOrderFrame: return "OUT_OF_ORDER_FRAME";
    case ErrorCode::EmptyConfusion: return "EMPTY_CONFUSION";
    case ErrorCode::PairOutsideUniverse: return "PAIR_OUTSIDE_UNIVERSE";
    case ErrorCode::IndexMismatch: return "INDEX_MISMATCH";
    case ErrorCode::FormatMismatch: return "FORMAT_MISMATCH";
    case ErrorCode::SpecError: return "SPEC_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

/// Source position inside a query text or a trace file. Lines and columns
/// are 1-based; zero means "not applicable".
struct Position {
  std::size_t line = 0;
  std::size_t column = 0;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, Position pos = {})
      : std::runtime_error(format(code, message, pos)), code_(code), pos_(pos), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  Position position() const noexcept { return pos_; }
  /// The message without the code and position prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, Position pos) {
    std::string out(to_string(code));
    if (pos.line != 0) {
      out += " at " + std::to_string(pos.line) + ":" + std::to_string(pos.column);
    }
    out += ": ";
    out += message;
    return out;
  }

  ErrorCode code_;
  Position pos_;
  std::string message_;
};

}  // namespace cqlva
