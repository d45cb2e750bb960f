#include "dialign/codec.hpp"

#include <algorithm>
#include <set>

#include "dialign/error.hpp"

namespace dialign {

namespace {

[[noreturn]] void violation(const std::string& message, const std::string& path) {
  throw Error(ErrorCode::SchemaViolation, message, path);
}

const Json& require_object(const Json& json, const std::string& path) {
  if (!json.is_object()) violation("expected an object", path);
  return json;
}

const Json* member(const Json& object, const char* key) {
  auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

std::string require_string(const Json& object, const char* key, const std::string& path) {
  const Json* v = member(object, key);
  if (v == nullptr) violation(std::string("missing field '") + key + "'", path);
  if (!v->is_string()) violation(std::string("field '") + key + "' must be a string", path + "/" + key);
  return v->get<std::string>();
}

std::string optional_string(const Json& object, const char* key, const std::string& path,
                            std::string fallback = {}) {
  const Json* v = member(object, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) violation(std::string("field '") + key + "' must be a string", path + "/" + key);
  return v->get<std::string>();
}

const Json& require_array(const Json& object, const char* key, const std::string& path) {
  const Json* v = member(object, key);
  if (v == nullptr) violation(std::string("missing field '") + key + "'", path);
  if (!v->is_array()) violation(std::string("field '") + key + "' must be an array", path + "/" + key);
  return *v;
}

}  // namespace

Json parse_json(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what(), origin);
  }
}

std::string dump_canonical(const OrderedJson& json) {
  return json.dump(2, ' ', false, OrderedJson::error_handler_t::replace) + "\n";
}

OrderedJson value_to_json(const LabelValue& value) {
  OrderedJson out = OrderedJson::object();
  if (const auto* c = std::get_if<Classification>(&value)) {
    out["kind"] = "classification";
    out["selected"] = OrderedJson::array();
    for (const auto& name : c->selected) out["selected"].push_back(name);
  } else {
    out["kind"] = "slot_value";
    out["pairs"] = OrderedJson::object();
    for (const auto& [slot, v] : std::get<SlotValue>(value).pairs) out["pairs"][slot] = v;
  }
  return out;
}

LabelValue value_from_json(const Json& json, const std::string& path) {
  require_object(json, path);
  const std::string kind = require_string(json, "kind", path);
  if (kind == "classification") {
    Classification c;
    for (std::size_t i = 0; const auto& entry : require_array(json, "selected", path)) {
      const std::string entry_path = path + "/selected/" + std::to_string(i++);
      if (!entry.is_string()) violation("class names must be strings", entry_path);
      if (!c.selected.insert(entry.get<std::string>()).second)
        violation("duplicate class '" + entry.get<std::string>() + "'", entry_path);
    }
    return c;
  }
  if (kind == "slot_value") {
    const Json* pairs = member(json, "pairs");
    if (pairs == nullptr) violation("missing field 'pairs'", path);
    if (!pairs->is_object()) violation("field 'pairs' must be an object", path + "/pairs");
    SlotValue s;
    for (const auto& [slot, v] : pairs->items()) {
      if (!v.is_string()) violation("slot values must be strings", path + "/pairs/" + slot);
      s.pairs.emplace(slot, v.get<std::string>());
    }
    return s;
  }
  violation("unknown label kind '" + kind + "'", path + "/kind");
}

OrderedJson turn_to_json(const Turn& turn) {
  OrderedJson out = OrderedJson::object();
  out["index"] = turn.index;
  out["usr"] = turn.usr;
  out["sys"] = turn.sys;
  // Known and opaque labels have disjoint names; emit both in name order.
  std::map<std::string, OrderedJson> merged;
  for (const auto& [name, value] : turn.labels) merged.emplace(name, value_to_json(value));
  for (const auto& [name, text] : turn.opaque_labels) merged.emplace(name, OrderedJson::parse(text));
  out["labels"] = OrderedJson::object();
  for (auto& [name, value] : merged) out["labels"][name] = std::move(value);
  return out;
}

OrderedJson dialogue_to_json(const Dialogue& dialogue) {
  OrderedJson out = OrderedJson::object();
  out["id"] = dialogue.id;
  out["name"] = dialogue.name;
  out["turns"] = OrderedJson::array();
  for (const auto& turn : dialogue.turns) out["turns"].push_back(turn_to_json(turn));
  return out;
}

OrderedJson collection_to_json(const DialogueCollection& collection) {
  OrderedJson out = OrderedJson::object();
  out["schema_version"] = collection.schema_version;
  out["name"] = collection.name;
  out["dialogues"] = OrderedJson::array();
  for (const auto& d : collection.dialogues) out["dialogues"].push_back(dialogue_to_json(d));
  return out;
}

Turn turn_from_json(const Json& json, const LabelSchema& schema, std::size_t position,
                    const ParseOptions& options, const std::string& path) {
  require_object(json, path);
  Turn turn;
  turn.index = position;
  if (const Json* index = member(json, "index")) {
    if (!index->is_number_unsigned() || index->get<std::size_t>() != position)
      violation("turn index must equal its position " + std::to_string(position),
                path + "/index");
  }
  turn.usr = require_string(json, "usr", path);
  turn.sys = optional_string(json, "sys", path);
  if (const Json* labels = member(json, "labels")) {
    if (!labels->is_object()) violation("field 'labels' must be an object", path + "/labels");
    for (const auto& [name, value] : labels->items()) {
      const std::string label_path = path + "/labels/" + name;
      const LabelDef* def = schema.find(name);
      if (def == nullptr) {
        if (!options.allow_unknown_labels)
          throw Error(ErrorCode::UnknownLabel, "label '" + name + "' is not in the schema",
                      label_path);
        if (options.on_warning)
          options.on_warning("keeping unknown label '" + name + "' at " + label_path);
        turn.opaque_labels.emplace(name, value.dump());
        continue;
      }
      LabelValue decoded = value_from_json(value, label_path);
      validate_value(*def, decoded, label_path);
      turn.labels.emplace(name, std::move(decoded));
    }
  }
  validate_turn(schema, turn, path);
  return turn;
}

Dialogue dialogue_from_json(const Json& json, const LabelSchema& schema,
                            const ParseOptions& options, const std::string& path) {
  require_object(json, path);
  Dialogue dialogue;
  dialogue.id = optional_string(json, "id", path);
  dialogue.name = optional_string(json, "name", path, dialogue.id);
  const Json& turns = require_array(json, "turns", path);
  dialogue.turns.reserve(turns.size());
  for (std::size_t i = 0; i < turns.size(); ++i)
    dialogue.turns.push_back(
        turn_from_json(turns[i], schema, i, options, path + "/turns/" + std::to_string(i)));
  return dialogue;
}

DialogueCollection collection_from_json(const Json& json, const LabelSchema& schema,
                                        const ParseOptions& options) {
  require_object(json, "");
  DialogueCollection collection;
  if (const Json* version = member(json, "schema_version")) {
    if (!version->is_number_integer() || version->get<int>() != kSchemaVersion)
      violation("unsupported schema_version", "/schema_version");
  }
  collection.name = optional_string(json, "name", "");
  const Json& dialogues = require_array(json, "dialogues", "");
  std::vector<std::size_t> unnamed;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const std::string path = "/dialogues/" + std::to_string(i);
    collection.dialogues.push_back(dialogue_from_json(dialogues[i], schema, options, path));
    if (collection.dialogues.back().id.empty()) unnamed.push_back(i);
  }
  for (std::size_t i : unnamed) {
    auto& d = collection.dialogues[i];
    d.id = next_dialogue_id(collection);
    if (d.name.empty()) d.name = d.id;
  }
  validate_collection(schema, collection);
  return collection;
}

// --- schema config ----------------------------------------------------------

OrderedJson binding_to_json(const RecommenderBinding& binding) {
  OrderedJson out = OrderedJson::object();
  out["type"] = recommender_type_name(binding);
  if (const auto* c = std::get_if<ConstantRecommender>(&binding)) {
    out["value"] = value_to_json(c->value);
  } else if (const auto* k = std::get_if<KeywordRecommender>(&binding)) {
    out["rules"] = OrderedJson::array();
    for (const auto& rule : k->rules) {
      OrderedJson r = OrderedJson::object();
      r["pattern"] = rule.pattern;
      if (rule.slot_value) {
        r["slot"] = rule.target;
        r["value"] = *rule.slot_value;
      } else {
        r["class"] = rule.target;
      }
      out["rules"].push_back(std::move(r));
    }
  } else {
    const auto& e = std::get<ExternalRecommender>(binding);
    out["url"] = e.url;
    out["timeout_ms"] = e.timeout_ms;
  }
  return out;
}

OrderedJson schema_to_json(const LabelSchema& schema) {
  OrderedJson out = OrderedJson::object();
  out["labels"] = OrderedJson::array();
  for (const auto& def : schema.labels) {
    OrderedJson l = OrderedJson::object();
    l["name"] = def.name;
    l["kind"] = to_string(def.kind);
    if (def.cardinality) l["cardinality"] = to_string(*def.cardinality);
    l["values"] = def.values;
    if (def.recommender) l["recommender"] = binding_to_json(*def.recommender);
    out["labels"].push_back(std::move(l));
  }
  if (schema.response_generator) {
    OrderedJson g = OrderedJson::object();
    g["url"] = schema.response_generator->url;
    g["timeout_ms"] = schema.response_generator->timeout_ms;
    out["response_generator"] = std::move(g);
  }
  return out;
}

namespace {

ExternalRecommender endpoint_from_json(const Json& json, const std::string& path) {
  ExternalRecommender e;
  e.url = require_string(json, "url", path);
  if (e.url.rfind("http://", 0) != 0 && e.url.rfind("https://", 0) != 0)
    violation("url must start with http:// or https://", path + "/url");
  if (const Json* timeout = member(json, "timeout_ms")) {
    if (!timeout->is_number_integer() || timeout->get<long long>() <= 0)
      violation("timeout_ms must be a positive integer", path + "/timeout_ms");
    e.timeout_ms = timeout->get<int>();
  }
  return e;
}

RecommenderBinding binding_from_json(const Json& json, const LabelDef& def,
                                     const std::string& path) {
  require_object(json, path);
  const std::string type = require_string(json, "type", path);
  if (type == "constant") {
    const Json* value = member(json, "value");
    if (value == nullptr) violation("constant recommender needs a 'value'", path);
    LabelValue v = value_from_json(*value, path + "/value");
    validate_value(def, v, path + "/value");
    return ConstantRecommender{std::move(v)};
  }
  if (type == "keyword") {
    KeywordRecommender k;
    const Json& rules = require_array(json, "rules", path);
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const std::string rule_path = path + "/rules/" + std::to_string(i);
      require_object(rules[i], rule_path);
      KeywordRule rule;
      rule.pattern = require_string(rules[i], "pattern", rule_path);
      if (rule.pattern.empty()) violation("empty keyword pattern", rule_path + "/pattern");
      if (def.kind == LabelKind::Classification) {
        rule.target = require_string(rules[i], "class", rule_path);
        if (!def.allows(rule.target))
          throw Error(ErrorCode::UnknownClass,
                      "rule targets class '" + rule.target + "' outside label '" + def.name + "'",
                      rule_path + "/class");
      } else {
        rule.target = require_string(rules[i], "slot", rule_path);
        rule.slot_value = require_string(rules[i], "value", rule_path);
        if (!def.allows(rule.target))
          throw Error(ErrorCode::UnknownSlot,
                      "rule targets slot '" + rule.target + "' outside label '" + def.name + "'",
                      rule_path + "/slot");
        if (rule.slot_value->empty())
          throw Error(ErrorCode::EmptySlotValue, "rule fills an empty slot value",
                      rule_path + "/value");
      }
      k.rules.push_back(std::move(rule));
    }
    return k;
  }
  if (type == "external") return endpoint_from_json(json, path);
  throw Error(ErrorCode::UnknownRecommenderType, "unknown recommender type '" + type + "'",
              path + "/type");
}

}  // namespace

LabelSchema schema_from_json(const Json& json) {
  require_object(json, "");
  LabelSchema schema;
  const Json& labels = require_array(json, "labels", "");
  std::set<std::string> names;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string path = "/labels/" + std::to_string(i);
    const Json& entry = require_object(labels[i], path);
    LabelDef def;
    def.name = require_string(entry, "name", path);
    if (def.name.empty()) violation("label name is empty", path + "/name");
    if (!names.insert(def.name).second)
      throw Error(ErrorCode::DuplicateLabel, "duplicate label '" + def.name + "'", path + "/name");

    const std::string kind = require_string(entry, "kind", path);
    if (kind == "classification") {
      def.kind = LabelKind::Classification;
      const std::string card = optional_string(entry, "cardinality", path, "multi");
      if (card == "single") def.cardinality = Cardinality::Single;
      else if (card == "multi") def.cardinality = Cardinality::Multi;
      else violation("cardinality must be 'single' or 'multi'", path + "/cardinality");
    } else if (kind == "slot_value") {
      def.kind = LabelKind::SlotValue;
      if (member(entry, "cardinality") != nullptr)
        violation("cardinality applies to classification labels only", path + "/cardinality");
    } else {
      violation("kind must be 'classification' or 'slot_value'", path + "/kind");
    }

    const Json* values = member(entry, "values");
    if (values == nullptr || !values->is_array() || values->empty())
      throw Error(ErrorCode::EmptyValues, "label '" + def.name + "' has no values",
                  path + "/values");
    for (std::size_t j = 0; j < values->size(); ++j) {
      const Json& v = (*values)[j];
      const std::string value_path = path + "/values/" + std::to_string(j);
      if (!v.is_string() || v.get<std::string>().empty())
        violation("values must be non-empty strings", value_path);
      if (def.allows(v.get<std::string>()))
        violation("duplicate value '" + v.get<std::string>() + "'", value_path);
      def.values.push_back(v.get<std::string>());
    }

    if (const Json* rec = member(entry, "recommender"); rec != nullptr && !rec->is_null())
      def.recommender = binding_from_json(*rec, def, path + "/recommender");
    schema.labels.push_back(std::move(def));
  }
  if (const Json* gen = member(json, "response_generator"); gen != nullptr && !gen->is_null()) {
    require_object(*gen, "/response_generator");
    schema.response_generator = endpoint_from_json(*gen, "/response_generator");
  }
  return schema;
}

OrderedJson segmentation_to_json(const RawSegmentation& seg) {
  OrderedJson out = OrderedJson::object();
  out["dialogues"] = seg.dialogues;
  out["spans"] = OrderedJson::array();
  for (const auto& spans : seg.spans) {
    OrderedJson d = OrderedJson::array();
    for (const auto& span : spans) d.push_back({span.first, span.last});
    out["spans"].push_back(std::move(d));
  }
  return out;
}

}  // namespace dialign
