#include "dialign/server.hpp"

#include <charconv>
#include <cstdio>

#include <httplib.h>

#include "dialign/segmenter.hpp"
#include "dialign/session.hpp"

namespace dialign {

OrderedJson api_error_json(const Error& error) {
  OrderedJson out = OrderedJson::object();
  out["status"] = http_status(error.code());
  out["code"] = code_name(error.code());
  out["message"] = error.what();
  out["path"] = error.path();
  return out;
}

OrderedJson failure_to_json(const RecommenderFailure& failure) {
  OrderedJson out = OrderedJson::object();
  out["label"] = failure.label;
  out["code"] = code_name(failure.code);
  out["message"] = failure.message;
  return out;
}

namespace {

constexpr const char* kJson = "application/json";

using httplib::Request;
using httplib::Response;

void send(Response& res, int status, const OrderedJson& body) {
  res.status = status;
  res.set_content(dump_canonical(body), kJson);
}

void send_error(Response& res, const Error& error) {
  send(res, http_status(error.code()), api_error_json(error));
}

std::size_t parse_index(const std::string& text) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorCode::BadRequest, "bad turn index '" + text + "'");
  return value;
}

bool flag(const Request& req, const char* name) {
  if (!req.has_param(name)) return false;
  const auto v = req.get_param_value(name);
  return v.empty() || v == "1" || v == "true";
}

std::string stem_of(const std::string& filename) {
  return std::filesystem::path(filename).stem().string();
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct Upload {
  std::string filename;
  std::string content;
};

// The request body, or every file part of a multipart form.
std::vector<Upload> uploads(const Request& req) {
  std::vector<Upload> out;
  if (req.is_multipart_form_data()) {
    for (const auto& [field, part] : req.files)
      out.push_back({part.filename.empty() ? part.name : part.filename, part.content});
    return out;
  }
  out.push_back({{}, req.body});
  return out;
}

class Api : public std::enable_shared_from_this<Api> {
 public:
  Api(Workspace& ws, const RecommenderRegistry& registry) : ws_(ws), registry_(registry) {}

  void install(httplib::Server& server);

 private:
  using Handler = void (Api::*)(const Request&, Response&);
  httplib::Server::Handler wrap(Handler handler) {
    return [self = shared_from_this(), handler](const Request& req, Response& res) {
      try {
        ((*self).*handler)(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        send_error(res, Error(ErrorCode::BadRequest, e.what()));
      } catch (const std::exception& e) {
        send_error(res, Error(ErrorCode::IoError, e.what()));
      }
    };
  }

  const LabelSchema& schema() const { return ws_.schema() ? *ws_.schema() : empty_schema_; }
  ParseOptions parse_options(const Request& req) const {
    ParseOptions options = ws_.parse_options();
    if (flag(req, "allow_unknown_labels")) options.allow_unknown_labels = true;
    return options;
  }
  std::string pick_dataset_name(const Request& req, const std::string& preferred) const;

  void get_schema(const Request&, Response& res);
  void list_datasets(const Request&, Response& res);
  void list_dialogues(const Request& req, Response& res);
  void get_dialogue(const Request& req, Response& res);
  void post_dataset(const Request& req, Response& res);
  void post_raw(const Request& req, Response& res);
  void create_raw(const Request& req, Response& res, const std::string& text,
                  const std::string& filename);
  void post_dialogue(const Request& req, Response& res);
  void put_dialogue(const Request& req, Response& res);
  void delete_dialogue(const Request& req, Response& res);
  void put_name(const Request& req, Response& res);
  void post_turn(const Request& req, Response& res);
  void put_turn(const Request& req, Response& res);
  void delete_turn(const Request& req, Response& res);
  void export_dataset(const Request& req, Response& res);
  void post_sessions(const Request& req, Response& res);
  void list_sessions(const Request&, Response& res);
  void get_session(const Request& req, Response& res);
  void accept(const Request& req, Response& res);
  void get_stats(const Request& req, Response& res);
  void export_session(const Request& req, Response& res);

  Workspace& ws_;
  const RecommenderRegistry& registry_;
  LabelSchema empty_schema_;
};

void Api::install(httplib::Server& server) {
  const std::string dataset = R"(/api/datasets/([^/]+))";
  const std::string dialogue = dataset + R"(/dialogues/([^/]+))";
  const std::string session = R"(/api/sessions/([^/]+))";

  server.Get("/api/schema", wrap(&Api::get_schema));
  server.Get("/api/datasets", wrap(&Api::list_datasets));
  server.Post("/api/datasets", wrap(&Api::post_dataset));
  server.Post("/api/datasets/raw", wrap(&Api::post_raw));
  server.Get(dataset + "/dialogues", wrap(&Api::list_dialogues));
  server.Post(dataset + "/dialogues", wrap(&Api::post_dialogue));
  server.Get(dataset + "/export", wrap(&Api::export_dataset));
  server.Get(dialogue, wrap(&Api::get_dialogue));
  server.Put(dialogue, wrap(&Api::put_dialogue));
  server.Delete(dialogue, wrap(&Api::delete_dialogue));
  server.Put(dialogue + "/name", wrap(&Api::put_name));
  server.Post(dialogue + "/turns", wrap(&Api::post_turn));
  server.Put(dialogue + R"(/turns/(\d+))", wrap(&Api::put_turn));
  server.Delete(dialogue + R"(/turns/(\d+))", wrap(&Api::delete_turn));
  server.Get("/api/sessions", wrap(&Api::list_sessions));
  server.Post("/api/sessions", wrap(&Api::post_sessions));
  server.Get(session, wrap(&Api::get_session));
  server.Post(session + "/accept", wrap(&Api::accept));
  server.Get(session + "/stats", wrap(&Api::get_stats));
  server.Get(session + "/export", wrap(&Api::export_session));

  // Unmatched routes and other bodiless failures still get an ApiError.
  server.set_error_handler([](const Request& req, Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const ErrorCode code = res.status == 404 ? ErrorCode::NotFound : ErrorCode::BadRequest;
    OrderedJson body = api_error_json(Error(code, "no route for " + req.method + " " + req.path, req.path));
    body["status"] = res.status;
    res.set_content(dump_canonical(body), kJson);
    return httplib::Server::HandlerResponse::Handled;
  });
}

std::string Api::pick_dataset_name(const Request& req, const std::string& preferred) const {
  if (req.has_param("name")) return req.get_param_value("name");
  if (is_valid_name(preferred)) return preferred;
  const auto names = ws_.dataset_names();
  for (unsigned n = 1;; ++n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "dataset-%04u", n);
    if (std::find(names.begin(), names.end(), buf) == names.end()) return buf;
  }
}

void Api::get_schema(const Request&, Response& res) {
  send(res, 200, schema_to_json(ws_.require_schema()));
}

void Api::list_datasets(const Request&, Response& res) {
  OrderedJson out = OrderedJson::array();
  for (const auto& name : ws_.dataset_names()) {
    auto collection = ws_.dataset(name);
    OrderedJson entry = OrderedJson::object();
    entry["name"] = name;
    entry["dialogues"] = collection->dialogues.size();
    out.push_back(std::move(entry));
  }
  send(res, 200, out);
}

void Api::list_dialogues(const Request& req, Response& res) {
  auto collection = ws_.dataset(req.matches[1]);
  OrderedJson out = OrderedJson::array();
  for (const auto& d : collection->dialogues) {
    OrderedJson entry = OrderedJson::object();
    entry["id"] = d.id;
    entry["name"] = d.name;
    entry["turns"] = d.turns.size();
    out.push_back(std::move(entry));
  }
  send(res, 200, out);
}

void Api::get_dialogue(const Request& req, Response& res) {
  auto collection = ws_.dataset(req.matches[1]);
  const Dialogue* d = collection->find(req.matches[2].str());
  if (d == nullptr)
    throw Error(ErrorCode::UnknownDialogue, "no dialogue '" + req.matches[2].str() + "'");
  send(res, 200, dialogue_to_json(*d));
}

void Api::post_dataset(const Request& req, Response& res) {
  const auto files = uploads(req);
  if (files.size() != 1) throw Error(ErrorCode::BadRequest, "expected exactly one dataset file");
  const Upload& upload = files.front();
  if (ends_with(upload.filename, ".txt")) return create_raw(req, res, upload.content, upload.filename);

  auto collection = parse(upload.content, schema(), parse_options(req));
  const std::string preferred = upload.filename.empty() ? collection.name : stem_of(upload.filename);
  const std::string name = pick_dataset_name(req, preferred);
  auto stored = ws_.create_dataset(name, std::move(collection));
  res.set_header("Location", "/api/datasets/" + name);
  send(res, 201, collection_to_json(*stored));
}

void Api::post_raw(const Request& req, Response& res) {
  const auto files = uploads(req);
  if (files.size() != 1) throw Error(ErrorCode::BadRequest, "expected exactly one text file");
  create_raw(req, res, files.front().content, files.front().filename);
}

void Api::create_raw(const Request& req, Response& res, const std::string& text,
                     const std::string& filename) {
  const RawSegmentation seg = segment(text);
  const std::string name =
      pick_dataset_name(req, filename.empty() ? std::string() : stem_of(filename));
  auto built = to_dialogues(seg, schema(), registry_, name);
  auto stored = ws_.create_dataset(name, std::move(built.collection));

  OrderedJson out = OrderedJson::object();
  out["name"] = name;
  out["dataset"] = collection_to_json(*stored);
  out["segmentation"] = segmentation_to_json(seg);
  out["failures"] = OrderedJson::array();
  for (const auto& f : built.failures) out["failures"].push_back(failure_to_json(f));
  res.set_header("Location", "/api/datasets/" + name);
  send(res, 201, out);
}

void Api::post_dialogue(const Request& req, Response& res) {
  AddDialogue edit;
  if (!req.body.empty()) {
    const Json body = parse_json(req.body);
    if (body.contains("name")) edit.name = body.at("name").get<std::string>();
  }
  auto outcome = ws_.mutate(req.matches[1], edit);
  send(res, 201, dialogue_to_json(*outcome.state->find(outcome.dialogue_id)));
}

void Api::put_dialogue(const Request& req, Response& res) {
  const std::string id = req.matches[2];
  Dialogue d = dialogue_from_json(parse_json(req.body), schema(), parse_options(req), "");
  auto outcome = ws_.mutate(req.matches[1], ReplaceDialogue{id, std::move(d)});
  send(res, 200, dialogue_to_json(*outcome.state->find(id)));
}

void Api::delete_dialogue(const Request& req, Response& res) {
  ws_.mutate(req.matches[1], DeleteDialogue{req.matches[2]});
  res.status = 204;
}

void Api::put_name(const Request& req, Response& res) {
  const Json body = parse_json(req.body);
  if (!body.is_object() || !body.contains("name") || !body["name"].is_string())
    throw Error(ErrorCode::ValidationError, "body must be {\"name\": str}", "/name");
  const std::string id = req.matches[2];
  auto outcome = ws_.mutate(req.matches[1], RenameDialogue{id, body["name"].get<std::string>()});
  send(res, 200, dialogue_to_json(*outcome.state->find(id)));
}

void Api::post_turn(const Request& req, Response& res) {
  const Json body = parse_json(req.body);
  if (!body.is_object() || !body.contains("usr") || !body["usr"].is_string())
    throw Error(ErrorCode::ValidationError, "body must be {\"usr\": str}", "/usr");
  Turn turn;
  turn.usr = body["usr"].get<std::string>();
  if (turn.usr.empty()) throw Error(ErrorCode::ValidationError, "empty user query", "/usr");

  // Fail fast on a bad target before running any recommender.
  auto collection = ws_.dataset(req.matches[1]);
  if (collection->find(req.matches[2].str()) == nullptr)
    throw Error(ErrorCode::UnknownDialogue, "no dialogue '" + req.matches[2].str() + "'");

  Suggestions suggestions = suggest_all(registry_, schema(), turn.usr);
  turn.labels = std::move(suggestions.values);
  if (body.contains("sys") && body["sys"].is_string()) {
    turn.sys = body["sys"].get<std::string>();
  } else if (schema().response_generator) {
    try {
      turn.sys = generate_response(*schema().response_generator, turn.usr);
    } catch (const Error& e) {
      suggestions.failures.push_back({"sys", e.code(), e.what()});
    }
  }

  auto outcome = ws_.mutate(req.matches[1], AddTurn{req.matches[2], std::move(turn)});
  OrderedJson out = OrderedJson::object();
  out["turn"] = turn_to_json(outcome.state->find(outcome.dialogue_id)->turns.at(*outcome.turn_index));
  out["failures"] = OrderedJson::array();
  for (const auto& f : suggestions.failures) out["failures"].push_back(failure_to_json(f));
  send(res, 201, out);
}

void Api::put_turn(const Request& req, Response& res) {
  const std::size_t index = parse_index(req.matches[3]);
  Turn turn = turn_from_json(parse_json(req.body), schema(), index, parse_options(req), "");
  auto outcome = ws_.mutate(req.matches[1], UpdateTurn{req.matches[2], index, std::move(turn)});
  send(res, 200, turn_to_json(outcome.state->find(outcome.dialogue_id)->turns.at(index)));
}

void Api::delete_turn(const Request& req, Response& res) {
  ws_.mutate(req.matches[1], DeleteTurn{req.matches[2], parse_index(req.matches[3])});
  res.status = 204;
}

void Api::export_dataset(const Request& req, Response& res) {
  const std::string name = req.matches[1];
  auto collection = ws_.dataset(name);
  res.status = 200;
  res.set_header("Content-Disposition", "attachment; filename=\"" + name + ".json\"");
  res.set_content(serialize(*collection), kJson);
}

void Api::post_sessions(const Request& req, Response& res) {
  std::vector<std::pair<std::string, DialogueCollection>> files;
  const ParseOptions options = parse_options(req);
  if (req.is_multipart_form_data()) {
    for (const auto& upload : uploads(req))
      files.emplace_back(stem_of(upload.filename), parse(upload.content, schema(), options));
  } else {
    const Json body = parse_json(req.body);
    const Json& list = body.is_object() && body.contains("annotations") ? body["annotations"] : body;
    if (!list.is_array())
      throw Error(ErrorCode::BadRequest,
                  "body must be [{\"annotator\": str, \"dataset\": <dataset>}, ...]");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Json& entry = list[i];
      const std::string path = "/annotations/" + std::to_string(i);
      if (!entry.is_object() || !entry.contains("annotator") || !entry["annotator"].is_string() ||
          !entry.contains("dataset"))
        throw Error(ErrorCode::ValidationError, "entry needs 'annotator' and 'dataset'", path);
      files.emplace_back(entry["annotator"].get<std::string>(),
                         collection_from_json(entry["dataset"], schema(), options));
    }
  }
  ws_.require_schema();
  auto sets = align_collections(files);
  OrderedJson out = OrderedJson::object();
  out["sessions"] = OrderedJson::array();
  for (auto& set : sets) {
    auto session = ws_.create_session(std::move(set));
    OrderedJson entry = OrderedJson::object();
    entry["id"] = session->id;
    const OrderedJson body = session_to_json(*session);
    for (const auto& [key, value] : body.items()) entry[key] = value;
    out["sessions"].push_back(std::move(entry));
  }
  send(res, 201, out);
}

void Api::list_sessions(const Request&, Response& res) {
  OrderedJson out = OrderedJson::array();
  for (const auto& id : ws_.session_ids()) {
    auto session = ws_.session(id);
    OrderedJson entry = OrderedJson::object();
    entry["id"] = id;
    entry["dialogue_id"] = session->set.dialogue_id;
    entry["annotators"] = session->set.annotators.size();
    entry["disagreements"] = session->disagreements.size();
    entry["unresolved"] = session->unresolved();
    out.push_back(std::move(entry));
  }
  send(res, 200, out);
}

void Api::get_session(const Request& req, Response& res) {
  auto session = ws_.session(req.matches[1]);
  OrderedJson out = OrderedJson::object();
  out["id"] = session->id;
  const OrderedJson body = session_to_json(*session);
  for (const auto& [key, value] : body.items()) out[key] = value;
  send(res, 200, out);
}

void Api::accept(const Request& req, Response& res) {
  const Json body = parse_json(req.body);
  if (!body.is_object() || !body.contains("turn") || !body["turn"].is_number_unsigned() ||
      !body.contains("label") || !body["label"].is_string())
    throw Error(ErrorCode::ValidationError, "body must be {\"turn\": int, \"label\": str}");
  std::optional<LabelValue> value;
  if (body.contains("value") && !body["value"].is_null()) {
    try {
      value = value_from_json(body["value"], "/value");
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidValue, e.what(), e.path());
    }
  }
  auto updated = ws_.accept(req.matches[1], body["turn"].get<std::size_t>(),
                            body["label"].get<std::string>(), std::move(value));
  send(res, 200, disagreement_to_json(updated));
}

void Api::get_stats(const Request& req, Response& res) {
  auto session = ws_.session(req.matches[1]);
  res.status = 200;
  res.set_content(stats_text(session->stats), kJson);
}

void Api::export_session(const Request& req, Response& res) {
  auto session = ws_.session(req.matches[1]);
  send(res, 200, dialogue_to_json(export_resolved(*session, ws_.require_schema())));
}

}  // namespace

void install_routes(httplib::Server& server, Workspace& workspace,
                    const RecommenderRegistry& registry, const ServerOptions& options) {
  // Each handler holds a reference to the Api object.
  std::make_shared<Api>(workspace, registry)->install(server);
  std::error_code ec;
  if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir, ec))
    server.set_mount_point("/", options.static_dir.string());
}

void serve(Workspace& workspace, const RecommenderRegistry& registry,
           const ServerOptions& options) {
  httplib::Server server;
  install_routes(server, workspace, registry, options);
  if (!server.bind_to_port(options.host, options.port))
    throw Error(ErrorCode::IoError,
                "cannot listen on " + options.host + ":" + std::to_string(options.port));
  std::fprintf(stderr, "dialign: serving %s on http://%s:%d\n", workspace.root().c_str(),
               options.host.c_str(), options.port);
  server.listen_after_bind();
}

}  // namespace dialign
