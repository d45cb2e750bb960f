#pragma once

// JSON codecs for the model types. Output uses nlohmann::ordered_json so key
// order is fixed by construction; input accepts any key order.

#include <string>

#include <json.hpp>

#include "dialign/model.hpp"
#include "dialign/segmenter.hpp"

namespace dialign {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Parses text, mapping parser failures to Error{MalformedJson}.
Json parse_json(std::string_view text, const std::string& origin = {});
// Two-space indent, UTF-8 kept verbatim, trailing newline.
std::string dump_canonical(const OrderedJson& json);

OrderedJson value_to_json(const LabelValue& value);
// Structural decoding only; validate against a LabelDef separately.
LabelValue value_from_json(const Json& json, const std::string& path);

OrderedJson turn_to_json(const Turn& turn);
OrderedJson dialogue_to_json(const Dialogue& dialogue);
OrderedJson collection_to_json(const DialogueCollection& collection);

// `position` is the turn's slot in its dialogue; a stored index must match.
Turn turn_from_json(const Json& json, const LabelSchema& schema, std::size_t position,
                    const ParseOptions& options, const std::string& path);
Dialogue dialogue_from_json(const Json& json, const LabelSchema& schema,
                            const ParseOptions& options, const std::string& path);
DialogueCollection collection_from_json(const Json& json, const LabelSchema& schema,
                                        const ParseOptions& options);

OrderedJson binding_to_json(const RecommenderBinding& binding);
OrderedJson schema_to_json(const LabelSchema& schema);
LabelSchema schema_from_json(const Json& json);

// {"dialogues": [[utterance, ...], ...], "spans": [[[first, last], ...], ...]}
OrderedJson segmentation_to_json(const RawSegmentation& seg);

}  // namespace dialign
