#pragma once

// Annotation suggestions.
//
// A recommender maps one user query to a value for one label. Built-ins are
// `constant` and `keyword`; `external` forwards the query to a model server:
//
//   POST <url>   {"label": <label name>, "query": <query>}
//   200          {"value": <label value JSON>}
//
// A response generator uses the same transport with {"query": str} ->
// {"sys": str}.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dialign/error.hpp"
#include "dialign/model.hpp"

namespace dialign {

struct RecommenderFailure {
  std::string label;
  ErrorCode code = ErrorCode::RecommenderFailure;
  std::string message;
};

class RecommenderRegistry {
 public:
  RecommenderRegistry() = default;

  // Collects the bindings declared in the schema.
  static RecommenderRegistry from_schema(const LabelSchema& schema);

  // Throws UnknownLabel if the label is not in `schema`.
  void bind(const LabelSchema& schema, std::string label, RecommenderBinding binding);

  const std::map<std::string, RecommenderBinding>& bindings() const { return bindings_; }
  bool empty() const { return bindings_.empty(); }

 private:
  std::map<std::string, RecommenderBinding> bindings_;
};

// Runs one recommender. The result always passes validate_value(def, .);
// otherwise throws InvalidPrediction. External failures throw
// ExternalTimeout or ExternalProtocolError.
LabelValue transform(const RecommenderBinding& binding, const LabelDef& def,
                     std::string_view query);

struct Suggestions {
  std::map<std::string, LabelValue> values;
  std::vector<RecommenderFailure> failures;
};

// One entry per bound label whose recommender succeeded. External calls run
// concurrently; the call returns once all of them have finished.
Suggestions suggest_all(const RecommenderRegistry& registry, const LabelSchema& schema,
                        std::string_view query);

// Asks a dialogue system for the system response to `query`.
std::string generate_response(const ExternalRecommender& endpoint, std::string_view query);

}  // namespace dialign
