#include "dialign/model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "dialign/codec.hpp"
#include "dialign/error.hpp"

namespace dialign {

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::Classification ? "classification" : "slot_value";
}

std::string_view to_string(Cardinality cardinality) {
  return cardinality == Cardinality::Single ? "single" : "multi";
}

LabelKind kind_of(const LabelValue& value) {
  return std::holds_alternative<Classification>(value) ? LabelKind::Classification
                                                       : LabelKind::SlotValue;
}

LabelValue empty_value(LabelKind kind) {
  if (kind == LabelKind::Classification) return Classification{};
  return SlotValue{};
}

bool is_empty(const LabelValue& value) {
  if (const auto* c = std::get_if<Classification>(&value)) return c->selected.empty();
  return std::get<SlotValue>(value).pairs.empty();
}

std::string describe(const LabelValue& value) {
  std::string out = "{";
  bool first = true;
  if (const auto* c = std::get_if<Classification>(&value)) {
    for (const auto& name : c->selected) {
      if (!first) out += ",";
      out += name;
      first = false;
    }
  } else {
    for (const auto& [slot, v] : std::get<SlotValue>(value).pairs) {
      if (!first) out += ",";
      out += slot + "=" + v;
      first = false;
    }
  }
  return out + "}";
}

std::string_view recommender_type_name(const RecommenderBinding& binding) {
  switch (binding.index()) {
    case 0: return "constant";
    case 1: return "keyword";
    default: return "external";
  }
}

bool LabelDef::allows(std::string_view entry) const {
  return std::find(values.begin(), values.end(), entry) != values.end();
}

const LabelDef* LabelSchema::find(std::string_view name) const {
  for (const auto& def : labels)
    if (def.name == name) return &def;
  return nullptr;
}

const Dialogue* DialogueCollection::find(std::string_view id) const {
  for (const auto& d : dialogues)
    if (d.id == id) return &d;
  return nullptr;
}

Dialogue* DialogueCollection::find(std::string_view id) {
  for (auto& d : dialogues)
    if (d.id == id) return &d;
  return nullptr;
}

void validate_value(const LabelDef& def, const LabelValue& value, const std::string& path) {
  if (kind_of(value) != def.kind) {
    throw Error(ErrorCode::SchemaViolation,
                "label '" + def.name + "' expects a " + std::string(to_string(def.kind)) +
                    " value",
                path);
  }
  if (const auto* c = std::get_if<Classification>(&value)) {
    for (const auto& name : c->selected) {
      if (!def.allows(name))
        throw Error(ErrorCode::UnknownClass,
                    "class '" + name + "' is not defined for label '" + def.name + "'", path);
    }
    if (def.cardinality.value_or(Cardinality::Multi) == Cardinality::Single &&
        c->selected.size() > 1) {
      throw Error(ErrorCode::CardinalityViolation,
                  "label '" + def.name + "' accepts one class, got " + describe(value), path);
    }
    return;
  }
  for (const auto& [slot, v] : std::get<SlotValue>(value).pairs) {
    if (!def.allows(slot))
      throw Error(ErrorCode::UnknownSlot,
                  "slot '" + slot + "' is not defined for label '" + def.name + "'", path);
    if (v.empty())
      throw Error(ErrorCode::EmptySlotValue,
                  "slot '" + slot + "' of label '" + def.name + "' has an empty value", path);
  }
}

void validate_turn(const LabelSchema& schema, const Turn& turn, const std::string& path) {
  if (turn.usr.empty())
    throw Error(ErrorCode::SchemaViolation, "turn has an empty user query", path + "/usr");
  for (const auto& [name, value] : turn.labels) {
    const LabelDef* def = schema.find(name);
    if (def == nullptr)
      throw Error(ErrorCode::UnknownLabel, "label '" + name + "' is not in the schema",
                  path + "/labels/" + name);
    validate_value(*def, value, path + "/labels/" + name);
  }
}

void validate_dialogue(const LabelSchema& schema, const Dialogue& dialogue,
                       const std::string& path) {
  if (dialogue.id.empty())
    throw Error(ErrorCode::SchemaViolation, "dialogue id is empty", path + "/id");
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const std::string turn_path = path + "/turns/" + std::to_string(i);
    if (dialogue.turns[i].index != i)
      throw Error(ErrorCode::SchemaViolation,
                  "turn index " + std::to_string(dialogue.turns[i].index) +
                      " at position " + std::to_string(i),
                  turn_path + "/index");
    validate_turn(schema, dialogue.turns[i], turn_path);
  }
}

void validate_collection(const LabelSchema& schema, const DialogueCollection& collection) {
  if (collection.schema_version != kSchemaVersion)
    throw Error(ErrorCode::SchemaViolation,
                "unsupported schema_version " + std::to_string(collection.schema_version),
                "/schema_version");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < collection.dialogues.size(); ++i) {
    const auto& d = collection.dialogues[i];
    const std::string path = "/dialogues/" + std::to_string(i);
    if (!seen.insert(d.id).second)
      throw Error(ErrorCode::SchemaViolation, "duplicate dialogue id '" + d.id + "'",
                  path + "/id");
    validate_dialogue(schema, d, path);
  }
}

void reindex(Dialogue& dialogue) {
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) dialogue.turns[i].index = i;
}

namespace {

constexpr std::string_view kIdPrefix = "dialogue-";

std::optional<unsigned long> id_counter(std::string_view id) {
  if (id.substr(0, kIdPrefix.size()) != kIdPrefix) return std::nullopt;
  auto digits = id.substr(kIdPrefix.size());
  if (digits.empty()) return std::nullopt;
  unsigned long n = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return n;
}

}  // namespace

std::string next_dialogue_id(const DialogueCollection& collection) {
  unsigned long top = 0;
  for (const auto& d : collection.dialogues)
    if (auto n = id_counter(d.id)) top = std::max(top, *n);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lu", top + 1);
  return std::string(kIdPrefix) + buf;
}

std::string serialize(const DialogueCollection& collection) {
  return dump_canonical(collection_to_json(collection));
}

DialogueCollection parse(std::string_view json, const LabelSchema& schema,
                         const ParseOptions& options) {
  auto doc = parse_json(json);
  auto collection = collection_from_json(doc, schema, options);
  return collection;
}

LabelSchema load_schema(std::string_view config) {
  return schema_from_json(parse_json(config, "schema"));
}

std::string schema_to_config(const LabelSchema& schema) {
  return dump_canonical(schema_to_json(schema));
}

}  // namespace dialign
