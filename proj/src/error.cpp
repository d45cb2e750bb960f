#include "dialign/error.hpp"

namespace dialign {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::CardinalityViolation: return "CardinalityViolation";
    case ErrorCode::UnknownSlot: return "UnknownSlot";
    case ErrorCode::EmptySlotValue: return "EmptySlotValue";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::EmptyValues: return "EmptyValues";
    case ErrorCode::UnknownRecommenderType: return "UnknownRecommenderType";
    case ErrorCode::RecommenderFailure: return "RecommenderFailure";
    case ErrorCode::ExternalTimeout: return "ExternalTimeout";
    case ErrorCode::ExternalProtocolError: return "ExternalProtocolError";
    case ErrorCode::InvalidPrediction: return "InvalidPrediction";
    case ErrorCode::TurnCountMismatch: return "TurnCountMismatch";
    case ErrorCode::UtteranceTextMismatch: return "UtteranceTextMismatch";
    case ErrorCode::TooFewAnnotators: return "TooFewAnnotators";
    case ErrorCode::DuplicateAnnotator: return "DuplicateAnnotator";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::AlreadyAccepted: return "AlreadyAccepted";
    case ErrorCode::UnresolvedRemaining: return "UnresolvedRemaining";
    case ErrorCode::UnknownDisagreement: return "UnknownDisagreement";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::UnknownDialogue: return "UnknownDialogue";
    case ErrorCode::UnknownTurn: return "UnknownTurn";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::DatasetExists: return "DatasetExists";
    case ErrorCode::SchemaMissing: return "SchemaMissing";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedJson:
    case ErrorCode::BadRequest:
      return 400;
    case ErrorCode::SchemaViolation:
    case ErrorCode::UnknownLabel:
    case ErrorCode::UnknownClass:
    case ErrorCode::CardinalityViolation:
    case ErrorCode::UnknownSlot:
    case ErrorCode::EmptySlotValue:
    case ErrorCode::DuplicateLabel:
    case ErrorCode::EmptyValues:
    case ErrorCode::UnknownRecommenderType:
    case ErrorCode::InvalidPrediction:
    case ErrorCode::TurnCountMismatch:
    case ErrorCode::UtteranceTextMismatch:
    case ErrorCode::TooFewAnnotators:
    case ErrorCode::DuplicateAnnotator:
    case ErrorCode::InvalidValue:
    case ErrorCode::ValidationError:
      return 422;
    case ErrorCode::UnknownDataset:
    case ErrorCode::UnknownDialogue:
    case ErrorCode::UnknownTurn:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownDisagreement:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyAccepted:
    case ErrorCode::UnresolvedRemaining:
    case ErrorCode::DatasetExists:
      return 409;
    // Recommender failures are normally reported inside a 200 body; these
    // statuses only apply if one escapes to the top level.
    case ErrorCode::RecommenderFailure:
    case ErrorCode::ExternalProtocolError:
      return 502;
    case ErrorCode::ExternalTimeout:
      return 504;
    case ErrorCode::CorruptFile:
    case ErrorCode::IoError:
    case ErrorCode::SchemaMissing:
      return 500;
  }
  return 500;
}

int exit_status(ErrorCode code) {
  return code == ErrorCode::IoError ? 2 : 1;
}

}  // namespace dialign
