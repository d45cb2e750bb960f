#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dialign {

// Machine-readable failure codes shared by every module. The server maps each
// code to exactly one HTTP status (see http_status()).
enum class ErrorCode {
  // core-model
  MalformedJson,
  SchemaViolation,
  UnknownLabel,
  UnknownClass,
  CardinalityViolation,
  UnknownSlot,
  EmptySlotValue,
  DuplicateLabel,
  EmptyValues,
  UnknownRecommenderType,
  // recommenders
  RecommenderFailure,
  ExternalTimeout,
  ExternalProtocolError,
  InvalidPrediction,
  // agreement
  TurnCountMismatch,
  UtteranceTextMismatch,
  TooFewAnnotators,
  DuplicateAnnotator,
  InvalidValue,
  AlreadyAccepted,
  UnresolvedRemaining,
  UnknownDisagreement,
  // store
  CorruptFile,
  IoError,
  ValidationError,
  UnknownDataset,
  UnknownDialogue,
  UnknownTurn,
  UnknownSession,
  DatasetExists,
  SchemaMissing,
  // server
  BadRequest,
  NotFound,
};

std::string_view code_name(ErrorCode code);

// HTTP status for a code: validation 422, unknown entity 404, conflicts 409,
// server-side faults 500, malformed requests 400.
int http_status(ErrorCode code);

// Process exit status for the CLI: I/O problems are 2, everything else 1.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string path = {})
      : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

  ErrorCode code() const { return code_; }
  // JSON-pointer-like location of the offending entry, or a file path.
  const std::string& path() const { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace dialign
