#include "dialign/session.hpp"

#include <algorithm>

#include "dialign/error.hpp"

namespace dialign {

std::size_t ResolutionSession::unresolved() const {
  return static_cast<std::size_t>(
      std::count_if(disagreements.begin(), disagreements.end(), [](const Disagreement& d) {
        return d.status == ResolutionStatus::Unresolved;
      }));
}

ResolutionSession open_session(std::string id, AnnotationSet set, const LabelSchema& schema) {
  ResolutionSession session;
  session.id = std::move(id);
  session.disagreements = detect(set, schema);
  session.stats = stats(set, schema, session.disagreements);
  session.kappa = kappa_report(set, schema);
  session.set = std::move(set);
  return session;
}

const Disagreement& accept(ResolutionSession& session, const LabelSchema& schema,
                           std::size_t turn, const std::string& label,
                           std::optional<LabelValue> value) {
  auto it = std::find_if(session.disagreements.begin(), session.disagreements.end(),
                         [&](const Disagreement& d) {
                           return d.tally.turn_index == turn && d.tally.label == label;
                         });
  if (it == session.disagreements.end())
    throw Error(ErrorCode::UnknownDisagreement,
                "no disagreement at turn " + std::to_string(turn) + " label '" + label + "'");
  const LabelDef* def = schema.find(label);
  if (def == nullptr) throw Error(ErrorCode::UnknownLabel, "label '" + label + "' is not in the schema");
  *it = accept(*it, *def, std::move(value));
  return *it;
}

Dialogue export_resolved(const ResolutionSession& session, const LabelSchema& schema) {
  return export_resolved(session.set, schema, session.disagreements);
}

OrderedJson stats_to_json(const AgreementStats& stats) {
  OrderedJson out = OrderedJson::object();
  out["kappa"] = stats.kappa;
  out["total_annotations"] = stats.total_annotations;
  out["total_errors"] = stats.total_errors;
  out["accuracy"] = stats.accuracy;
  return out;
}

std::string stats_text(const AgreementStats& stats) {
  return dump_canonical(stats_to_json(stats));
}

OrderedJson disagreement_to_json(const Disagreement& d) {
  OrderedJson out = OrderedJson::object();
  out["turn"] = d.tally.turn_index;
  out["label"] = d.tally.label;
  out["options"] = OrderedJson::array();
  for (const auto& option : d.tally.options) {
    OrderedJson o = OrderedJson::object();
    o["value"] = value_to_json(option.value);
    o["count"] = option.count;
    o["share"] = option.share;
    out["options"].push_back(std::move(o));
  }
  out["default"] = value_to_json(d.tally.default_value);
  out["tie"] = d.tally.tie;
  out["status"] = d.status == ResolutionStatus::Accepted ? "accepted" : "unresolved";
  out["resolved_value"] = d.resolved_value ? value_to_json(*d.resolved_value) : OrderedJson();
  return out;
}

OrderedJson session_to_json(const ResolutionSession& session) {
  OrderedJson out = OrderedJson::object();
  out["dialogue_id"] = session.set.dialogue_id;
  out["annotators"] = OrderedJson::object();
  for (const auto& [annotator, dialogue] : session.set.annotators)
    out["annotators"][annotator] = dialogue_to_json(dialogue);
  out["disagreements"] = OrderedJson::array();
  for (const auto& d : session.disagreements) out["disagreements"].push_back(disagreement_to_json(d));
  OrderedJson stats = stats_to_json(session.stats);
  stats["kappa_per_turn"] = session.kappa.per_turn;
  out["stats"] = std::move(stats);
  return out;
}

std::string serialize_session(const ResolutionSession& session) {
  return dump_canonical(session_to_json(session));
}

namespace {

[[noreturn]] void corrupt(const std::string& message, const std::string& path) {
  throw Error(ErrorCode::SchemaViolation, message, path);
}

}  // namespace

ResolutionSession parse_session(std::string_view text, std::string id, const LabelSchema& schema) {
  const Json doc = parse_json(text, id);
  if (!doc.is_object()) corrupt("session must be an object", "");
  if (!doc.contains("annotators") || !doc["annotators"].is_object())
    corrupt("missing 'annotators' object", "/annotators");

  std::vector<std::pair<std::string, Dialogue>> copies;
  for (const auto& [annotator, dialogue] : doc["annotators"].items()) {
    const std::string path = "/annotators/" + annotator;
    Dialogue d = dialogue_from_json(dialogue, schema, {}, path);
    validate_dialogue(schema, d, path);
    copies.emplace_back(annotator, std::move(d));
  }
  AnnotationSet set = align(std::move(copies));
  if (doc.contains("dialogue_id") && doc["dialogue_id"] != set.dialogue_id)
    corrupt("dialogue_id does not match the annotator copies", "/dialogue_id");

  ResolutionSession session = open_session(std::move(id), std::move(set), schema);

  const Json* stored = doc.contains("disagreements") ? &doc["disagreements"] : nullptr;
  if (stored == nullptr || !stored->is_array()) corrupt("missing 'disagreements' array", "/disagreements");
  if (stored->size() != session.disagreements.size())
    corrupt("stored disagreements do not match the annotator copies", "/disagreements");

  for (std::size_t i = 0; i < stored->size(); ++i) {
    const Json& entry = (*stored)[i];
    const std::string path = "/disagreements/" + std::to_string(i);
    Disagreement& d = session.disagreements[i];
    if (!entry.is_object() || entry.value("turn", Json()) != d.tally.turn_index ||
        entry.value("label", Json()) != d.tally.label)
      corrupt("disagreement does not match the annotator copies", path);
    if (entry.contains("default") &&
        value_from_json(entry["default"], path + "/default") != d.tally.default_value)
      corrupt("stored default differs from the recomputed majority", path + "/default");

    const std::string status = entry.value("status", std::string("unresolved"));
    if (status == "accepted") {
      if (!entry.contains("resolved_value") || entry["resolved_value"].is_null())
        corrupt("accepted disagreement lacks resolved_value", path + "/resolved_value");
      LabelValue v = value_from_json(entry["resolved_value"], path + "/resolved_value");
      validate_value(*schema.find(d.tally.label), v, path + "/resolved_value");
      d.status = ResolutionStatus::Accepted;
      d.resolved_value = std::move(v);
    } else if (status == "unresolved") {
      if (entry.contains("resolved_value") && !entry["resolved_value"].is_null())
        corrupt("unresolved disagreement carries a resolved_value", path + "/resolved_value");
    } else {
      corrupt("status must be 'unresolved' or 'accepted'", path + "/status");
    }
  }
  return session;
}

}  // namespace dialign
