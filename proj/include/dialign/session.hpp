#pragma once

// A resolution session: the aligned annotator copies of one dialogue plus
// the state of each disagreement. Serialized as
//
//   {"dialogue_id": str,
//    "annotators": {<annotator id>: <dialogue JSON>},
//    "disagreements": [{"turn", "label", "options": [{"value","count","share"}],
//                       "default", "tie", "status", "resolved_value"}],
//    "stats": {"kappa","total_annotations","total_errors","accuracy",
//              "kappa_per_turn"}}

#include <optional>
#include <string>
#include <vector>

#include "dialign/agreement.hpp"
#include "dialign/codec.hpp"

namespace dialign {

struct ResolutionSession {
  std::string id;
  AnnotationSet set;
  std::vector<Disagreement> disagreements;
  AgreementStats stats;
  KappaReport kappa;

  std::size_t unresolved() const;
};

// Aligns nothing; `set` must already be valid. Runs detect and stats.
ResolutionSession open_session(std::string id, AnnotationSet set, const LabelSchema& schema);

// Accepts the disagreement at (turn, label). Throws UnknownDisagreement,
// AlreadyAccepted, InvalidValue.
const Disagreement& accept(ResolutionSession& session, const LabelSchema& schema,
                           std::size_t turn, const std::string& label,
                           std::optional<LabelValue> value = std::nullopt);

Dialogue export_resolved(const ResolutionSession& session, const LabelSchema& schema);

// The four headline statistics, in a fixed key order. Shared by the CLI and
// the stats endpoint so both print identical bytes.
OrderedJson stats_to_json(const AgreementStats& stats);
std::string stats_text(const AgreementStats& stats);

OrderedJson disagreement_to_json(const Disagreement& d);
OrderedJson session_to_json(const ResolutionSession& session);
std::string serialize_session(const ResolutionSession& session);

// Re-validates the annotator copies against the schema, re-derives every
// tally, and checks stored tallies agree with it. Throws SchemaViolation on
// any inconsistency.
ResolutionSession parse_session(std::string_view json, std::string id, const LabelSchema& schema);

}  // namespace dialign
