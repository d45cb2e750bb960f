#include "dialign/recommenders.hpp"

#include <algorithm>
#include <cctype>
#include <future>

#include <httplib.h>

#include "dialign/codec.hpp"

namespace dialign {

RecommenderRegistry RecommenderRegistry::from_schema(const LabelSchema& schema) {
  RecommenderRegistry registry;
  for (const auto& def : schema.labels)
    if (def.recommender) registry.bindings_.emplace(def.name, *def.recommender);
  return registry;
}

void RecommenderRegistry::bind(const LabelSchema& schema, std::string label,
                               RecommenderBinding binding) {
  if (schema.find(label) == nullptr)
    throw Error(ErrorCode::UnknownLabel, "cannot bind a recommender to unknown label '" + label + "'");
  bindings_.insert_or_assign(std::move(label), std::move(binding));
}

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

LabelValue apply_keywords(const KeywordRecommender& rec, const LabelDef& def,
                          std::string_view query) {
  const std::string haystack = lowercase(query);
  const bool first_only = def.kind == LabelKind::Classification &&
                          def.cardinality.value_or(Cardinality::Multi) == Cardinality::Single;
  if (def.kind == LabelKind::Classification) {
    Classification out;
    for (const auto& rule : rec.rules) {
      if (haystack.find(lowercase(rule.pattern)) == std::string::npos) continue;
      out.selected.insert(rule.target);
      if (first_only) break;
    }
    return out;
  }
  SlotValue out;
  for (const auto& rule : rec.rules) {
    if (haystack.find(lowercase(rule.pattern)) == std::string::npos) continue;
    // Earlier rules win when several fill the same slot.
    out.pairs.emplace(rule.target, rule.slot_value.value_or(""));
  }
  return out;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start =
      scheme_end == std::string::npos ? std::string::npos : url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

Json post_json(const ExternalRecommender& endpoint, const OrderedJson& body) {
  const auto [origin, path] = split_url(endpoint.url);
  httplib::Client client(origin);
  if (!client.is_valid())
    throw Error(ErrorCode::ExternalProtocolError, "unsupported recommender url " + endpoint.url);
  const auto timeout = std::chrono::milliseconds(endpoint.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write ||
        err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::ExternalTimeout,
                  endpoint.url + " did not answer within " + std::to_string(endpoint.timeout_ms) +
                      " ms");
    }
    throw Error(ErrorCode::ExternalProtocolError,
                endpoint.url + ": " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw Error(ErrorCode::ExternalProtocolError,
                "status " + std::to_string(res->status) + ": " + res->body);
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error&) {
    throw Error(ErrorCode::ExternalProtocolError, "response is not JSON: " + res->body);
  }
}

LabelValue call_external(const ExternalRecommender& rec, const LabelDef& def,
                         std::string_view query) {
  OrderedJson body = OrderedJson::object();
  body["label"] = def.name;
  body["query"] = query;
  const Json reply = post_json(rec, body);
  if (!reply.is_object() || !reply.contains("value"))
    throw Error(ErrorCode::ExternalProtocolError, "response lacks 'value': " + reply.dump());
  try {
    return value_from_json(reply["value"], "/value");
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidPrediction,
                "malformed prediction " + reply["value"].dump() + ": " + e.what());
  }
}

}  // namespace

LabelValue transform(const RecommenderBinding& binding, const LabelDef& def,
                     std::string_view query) {
  if (query.empty()) throw Error(ErrorCode::ValidationError, "empty query");
  LabelValue value = std::visit(
      [&](const auto& rec) -> LabelValue {
        using T = std::decay_t<decltype(rec)>;
        if constexpr (std::is_same_v<T, ConstantRecommender>) return rec.value;
        else if constexpr (std::is_same_v<T, KeywordRecommender>) return apply_keywords(rec, def, query);
        else return call_external(rec, def, query);
      },
      binding);
  try {
    validate_value(def, value);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidPrediction,
                "prediction " + describe(value) + " rejected: " + e.what());
  }
  return value;
}

Suggestions suggest_all(const RecommenderRegistry& registry, const LabelSchema& schema,
                        std::string_view query) {
  Suggestions out;
  struct Pending {
    std::string label;
    std::future<LabelValue> result;
  };
  std::vector<Pending> pending;

  auto record = [&](const std::string& label, auto&& produce) {
    try {
      out.values.emplace(label, produce());
    } catch (const Error& e) {
      out.failures.push_back({label, e.code(), e.what()});
    } catch (const std::exception& e) {
      out.failures.push_back({label, ErrorCode::RecommenderFailure, e.what()});
    }
  };

  for (const auto& def : schema.labels) {
    auto it = registry.bindings().find(def.name);
    if (it == registry.bindings().end()) continue;
    const RecommenderBinding& binding = it->second;
    if (std::holds_alternative<ExternalRecommender>(binding)) {
      pending.push_back({def.name, std::async(std::launch::async, [&binding, &def, query] {
                           return transform(binding, def, query);
                         })});
    } else {
      record(def.name, [&] { return transform(binding, def, query); });
    }
  }
  for (auto& p : pending) record(p.label, [&] { return p.result.get(); });
  return out;
}

std::string generate_response(const ExternalRecommender& endpoint, std::string_view query) {
  OrderedJson body = OrderedJson::object();
  body["query"] = query;
  const Json reply = post_json(endpoint, body);
  if (!reply.is_object() || !reply.contains("sys") || !reply["sys"].is_string())
    throw Error(ErrorCode::ExternalProtocolError, "response lacks 'sys': " + reply.dump());
  return reply["sys"].get<std::string>();
}

}  // namespace dialign
