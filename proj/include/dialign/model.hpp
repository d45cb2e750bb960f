#pragma once

// Dialogue data model and label schema.
//
// A dataset is a DialogueCollection; each Dialogue is an ordered list of
// turns, and a Turn pairs one user query with one system response plus the
// annotations attached to the user query. The vocabulary of annotations is a
// LabelSchema loaded from a declarative JSON config.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dialign {

enum class LabelKind { Classification, SlotValue };
enum class Cardinality { Single, Multi };

std::string_view to_string(LabelKind kind);
std::string_view to_string(Cardinality cardinality);

struct Classification {
  std::set<std::string> selected;
  friend bool operator==(const Classification&, const Classification&) = default;
  friend bool operator<(const Classification& a, const Classification& b) {
    return a.selected < b.selected;
  }
};

struct SlotValue {
  std::map<std::string, std::string> pairs;  // slot name -> value
  friend bool operator==(const SlotValue&, const SlotValue&) = default;
  friend bool operator<(const SlotValue& a, const SlotValue& b) { return a.pairs < b.pairs; }
};

// Ordered so values can key maps (category counting).
using LabelValue = std::variant<Classification, SlotValue>;

LabelKind kind_of(const LabelValue& value);
LabelValue empty_value(LabelKind kind);
bool is_empty(const LabelValue& value);
// Compact human-readable form, e.g. "{inform,request}" or "{area=north}".
std::string describe(const LabelValue& value);

// --- recommender bindings -------------------------------------------------

// Returns the bound value for every query.
struct ConstantRecommender {
  LabelValue value;
  friend bool operator==(const ConstantRecommender&, const ConstantRecommender&) = default;
};

// Case-insensitive substring rule. For classification labels `target` is a
// class name; for slot-value labels it is a slot name and `slot_value` holds
// the value to fill in.
struct KeywordRule {
  std::string pattern;
  std::string target;
  std::optional<std::string> slot_value;
  friend bool operator==(const KeywordRule&, const KeywordRule&) = default;
};

struct KeywordRecommender {
  std::vector<KeywordRule> rules;
  friend bool operator==(const KeywordRecommender&, const KeywordRecommender&) = default;
};

inline constexpr int kDefaultExternalTimeoutMs = 2000;

// Model reachable over HTTP; see recommenders.hpp for the wire protocol.
struct ExternalRecommender {
  std::string url;
  int timeout_ms = kDefaultExternalTimeoutMs;
  friend bool operator==(const ExternalRecommender&, const ExternalRecommender&) = default;
};

using RecommenderBinding =
    std::variant<ConstantRecommender, KeywordRecommender, ExternalRecommender>;

std::string_view recommender_type_name(const RecommenderBinding& binding);

// --- schema ---------------------------------------------------------------

struct LabelDef {
  std::string name;
  LabelKind kind = LabelKind::Classification;
  std::optional<Cardinality> cardinality;  // classification only
  std::vector<std::string> values;         // class names or slot names
  std::optional<RecommenderBinding> recommender;

  bool allows(std::string_view entry) const;
  friend bool operator==(const LabelDef&, const LabelDef&) = default;
};

struct LabelSchema {
  std::vector<LabelDef> labels;
  // Optional dialogue system that proposes the `sys` text for a new query.
  std::optional<ExternalRecommender> response_generator;

  const LabelDef* find(std::string_view name) const;
  friend bool operator==(const LabelSchema&, const LabelSchema&) = default;
};

// --- dialogues ------------------------------------------------------------

struct Turn {
  std::size_t index = 0;
  std::string usr;
  std::string sys;
  std::map<std::string, LabelValue> labels;
  // Labels missing from the schema, kept verbatim (canonical JSON text) when
  // a file is ingested with unknown labels allowed.
  std::map<std::string, std::string> opaque_labels;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
  std::string id;
  std::string name;
  std::vector<Turn> turns;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

inline constexpr int kSchemaVersion = 1;

struct DialogueCollection {
  int schema_version = kSchemaVersion;
  std::string name;
  std::vector<Dialogue> dialogues;

  const Dialogue* find(std::string_view id) const;
  Dialogue* find(std::string_view id);
  friend bool operator==(const DialogueCollection&, const DialogueCollection&) = default;
};

// --- validation -----------------------------------------------------------

// Throws Error{UnknownClass | CardinalityViolation | UnknownSlot |
// EmptySlotValue | SchemaViolation} naming the offending entry.
void validate_value(const LabelDef& def, const LabelValue& value,
                    const std::string& path = {});

// Checks every TYPE invariant of a turn / dialogue / collection against the
// schema. Unknown label keys raise UnknownLabel.
void validate_turn(const LabelSchema& schema, const Turn& turn, const std::string& path = {});
void validate_dialogue(const LabelSchema& schema, const Dialogue& dialogue,
                       const std::string& path = {});
void validate_collection(const LabelSchema& schema, const DialogueCollection& collection);

// Renumbers turn indices to 0..n-1.
void reindex(Dialogue& dialogue);

// "dialogue-0001", "dialogue-0002", ... first counter above any existing id
// of that shape in the collection.
std::string next_dialogue_id(const DialogueCollection& collection);

// --- serialization --------------------------------------------------------

struct ParseOptions {
  // Keep labels that the schema does not define instead of rejecting them.
  bool allow_unknown_labels = false;
  std::function<void(const std::string& warning)> on_warning;
};

// Canonical dataset JSON: stable key order, two-space indent, LF, trailing
// newline. Byte-identical for equal collections.
std::string serialize(const DialogueCollection& collection);

// Throws MalformedJson, SchemaViolation, UnknownLabel, or any validate_value
// error.
DialogueCollection parse(std::string_view json, const LabelSchema& schema,
                         const ParseOptions& options = {});

// Throws MalformedJson, SchemaViolation, DuplicateLabel, EmptyValues,
// UnknownRecommenderType.
LabelSchema load_schema(std::string_view config);
std::string schema_to_config(const LabelSchema& schema);

}  // namespace dialign
