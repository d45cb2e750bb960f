#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "dialign/codec.hpp"
#include "dialign/error.hpp"
#include "dialign/recommenders.hpp"
#include "support/http.hpp"

using namespace dialign;
using dialign::testing::TestServer;

namespace {

LabelSchema intent_schema() {
  return load_schema(R"({"labels":[
    {"name":"intent","kind":"classification","cardinality":"single","values":["inform","request","greet"]},
    {"name":"acts","kind":"classification","cardinality":"multi","values":["inform","request","greet"]},
    {"name":"food","kind":"slot_value","values":["restaurant-type","area"]}]})");
}

// Replies with whatever `reply` holds for every POST to /predict.
struct Stub {
  std::string reply = R"({"value":{"kind":"classification","selected":["request"]}})";
  int status = 200;
  int delay_ms = 0;
  std::atomic<int> calls{0};
  std::string last_body;
  TestServer server{[this](httplib::Server& s) {
    s.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      last_body = req.body;
      if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      res.status = status;
      res.set_content(reply, "application/json");
    });
  }};
  ExternalRecommender endpoint(int timeout_ms = 2000) const {
    return {server.url("/predict"), timeout_ms};
  }
};

ErrorCode transform_error(const RecommenderBinding& b, const LabelDef& def, std::string_view q) {
  try {
    transform(b, def, q);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("transform did not throw");
  return ErrorCode::BadRequest;
}

}  // namespace

TEST_CASE("constant recommender returns its value") {
  const auto schema = intent_schema();
  const auto& def = *schema.find("intent");
  const ConstantRecommender rec{Classification{{"greet"}}};
  CHECK(transform(rec, def, "anything") == LabelValue{Classification{{"greet"}}});
  CHECK(transform_error(rec, def, "") == ErrorCode::ValidationError);
}

TEST_CASE("keyword rules are case-insensitive substrings") {
  const auto schema = intent_schema();
  const KeywordRecommender rec{{{"where", "request", {}}, {"HELLO", "greet", {}}}};
  CHECK(transform(rec, *schema.find("acts"), "Hello, where is it?") ==
        LabelValue{Classification{{"greet", "request"}}});
  // Single cardinality keeps the first matching rule.
  CHECK(transform(rec, *schema.find("intent"), "Hello, where is it?") ==
        LabelValue{Classification{{"request"}}});
  CHECK(transform(rec, *schema.find("intent"), "nothing here") == LabelValue{Classification{}});
}

TEST_CASE("keyword slot rules fill slots, earlier rules first") {
  const auto schema = intent_schema();
  const KeywordRecommender rec{{{"pizza", "restaurant-type", "italian"},
                                {"pasta", "restaurant-type", "other"},
                                {"north", "area", "north"}}};
  CHECK(transform(rec, *schema.find("food"), "pasta and pizza up north") ==
        LabelValue{SlotValue{{{"restaurant-type", "italian"}, {"area", "north"}}}});
}

TEST_CASE("invalid bound constants are rejected as InvalidPrediction") {
  const auto schema = intent_schema();
  const ConstantRecommender rec{Classification{{"inform", "request"}}};
  CHECK(transform_error(rec, *schema.find("intent"), "q") == ErrorCode::InvalidPrediction);
}

TEST_CASE("registry binds only known labels") {
  const auto schema = intent_schema();
  RecommenderRegistry registry;
  CHECK(registry.empty());
  registry.bind(schema, "intent", ConstantRecommender{Classification{{"greet"}}});
  CHECK(registry.bindings().size() == 1);
  CHECK_THROWS_AS(registry.bind(schema, "mood", ConstantRecommender{}), Error);
}

TEST_CASE("external protocol: request shape and valid prediction") {
  Stub stub;
  const auto schema = intent_schema();
  CHECK(transform(stub.endpoint(), *schema.find("intent"), "where is it") ==
        LabelValue{Classification{{"request"}}});
  const auto body = Json::parse(stub.last_body);
  CHECK(body == Json{{"label", "intent"}, {"query", "where is it"}});
}

TEST_CASE("external protocol: failures map to distinct codes") {
  Stub stub;
  const auto schema = intent_schema();
  const auto& def = *schema.find("intent");

  stub.reply = R"({"value":{"kind":"classification","selected":["bogus"]}})";
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::InvalidPrediction);
  stub.reply = R"({"value":{"kind":"classification","selected":["inform","request"]}})";
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::InvalidPrediction);
  stub.reply = R"({"value":{"kind":"nonsense"}})";
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::InvalidPrediction);
  stub.reply = R"({"other":1})";
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::ExternalProtocolError);
  stub.reply = "not json";
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::ExternalProtocolError);
  stub.reply = "{}";
  stub.status = 500;
  CHECK(transform_error(stub.endpoint(), def, "q") == ErrorCode::ExternalProtocolError);
  stub.status = 200;
  stub.reply = R"({"value":{"kind":"classification","selected":[]}})";
  stub.delay_ms = 600;
  CHECK(transform_error(stub.endpoint(100), def, "q") == ErrorCode::ExternalTimeout);
}

TEST_CASE("unreachable external recommender is a protocol error") {
  const auto schema = intent_schema();
  int port = 0;
  { TestServer closed([](httplib::Server&) {}); port = closed.port(); }
  const ExternalRecommender rec{"http://127.0.0.1:" + std::to_string(port) + "/x", 300};
  const ErrorCode code = transform_error(rec, *schema.find("intent"), "q");
  CHECK((code == ErrorCode::ExternalProtocolError || code == ErrorCode::ExternalTimeout));
}

TEST_CASE("suggest_all collects failures without dropping successes") {
  Stub slow;
  slow.delay_ms = 600;
  const auto schema = intent_schema();
  RecommenderRegistry registry;
  registry.bind(schema, "intent", slow.endpoint(100));
  registry.bind(schema, "acts", KeywordRecommender{{{"hi", "greet", {}}}});
  registry.bind(schema, "food", ConstantRecommender{SlotValue{{{"area", ""}}}});
  const auto out = suggest_all(registry, schema, "hi there");
  CHECK(out.values.size() == 1);
  CHECK(out.values.at("acts") == LabelValue{Classification{{"greet"}}});
  REQUIRE(out.failures.size() == 2);
  for (const auto& f : out.failures) {
    if (f.label == "intent") CHECK(f.code == ErrorCode::ExternalTimeout);
    else CHECK(f.code == ErrorCode::InvalidPrediction);
  }
}

TEST_CASE("external calls run concurrently") {
  Stub stub;
  stub.delay_ms = 300;
  auto schema = intent_schema();
  stub.reply = R"({"value":{"kind":"classification","selected":[]}})";
  RecommenderRegistry registry;
  registry.bind(schema, "intent", stub.endpoint());
  registry.bind(schema, "acts", stub.endpoint());
  const auto start = std::chrono::steady_clock::now();
  const auto out = suggest_all(registry, schema, "q");
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(out.values.size() == 2);
  CHECK(stub.calls == 2);
  CHECK(elapsed < std::chrono::milliseconds(550));
}

TEST_CASE("response generator") {
  TestServer gen([](httplib::Server& s) {
    s.Post("/reply", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      res.set_content(Json{{"sys", "you said " + body["query"].get<std::string>()}}.dump(),
                      "application/json");
    });
  });
  CHECK(generate_response({gen.url("/reply"), 1000}, "hi") == "you said hi");
}
