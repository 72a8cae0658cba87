#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vrgen {

enum class ErrorCode {
  UnreadableFile,
  MalformedRecord,
  MalformedLine,
  UnknownTag,
  EmptyCorpus,
  DegenerateCorpus,
  FormatVersionMismatch,
  EmptyDataset,
  DimensionMismatch,
  EmptySentence,
  LengthMismatch,
  TooFewPoints,
  EmptyValue,
  SingleClass,
  EmptyTrainingSet,
  SyntaxError,
  UnbalancedParens,
  RangeRestrictionViolation,
  EmptyMatrix,
  MissingCoreEntity,
  UnmappableCluster,
  MissingArtifact,
  ConfigError,
  TooFewRules,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as Error; code() identifies the contract
// violation so callers and tests can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse errors carry a source position (1-based line and column).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, std::size_t column, const std::string& expected)
      : Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                        ": expected " + expected),
        line_(line),
        column_(column),
        expected_(expected) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string expected_;
};

}  // namespace vrgen
