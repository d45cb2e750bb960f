// dialign: batch access to the annotation pipeline.
//
//   dialign segment <in.txt> -o <out.json>
//   dialign validate <file.json>
//   dialign stats <a1.json> <a2.json> ...
//   dialign resolve <a1.json> <a2.json> ... --majority -o merged.json [--break-ties]
//   dialign serve --workspace <dir>
//
// Exit status: 0 success, 1 domain failure, 2 I/O or usage failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dialign/agreement.hpp"
#include "dialign/codec.hpp"
#include "dialign/error.hpp"
#include "dialign/recommenders.hpp"
#include "dialign/segmenter.hpp"
#include "dialign/server.hpp"
#include "dialign/session.hpp"
#include "dialign/store.hpp"

namespace fs = std::filesystem;
using namespace dialign;

namespace {

bool json_errors = false;

int report(const Error& e) {
  if (json_errors) {
    std::cerr << api_error_json(e).dump() << "\n";
  } else {
    std::cerr << "dialign: " << code_name(e.code()) << ": " << e.what();
    if (!e.path().empty()) std::cerr << " (at " << e.path() << ")";
    std::cerr << "\n";
  }
  return exit_status(e.code());
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// --config, else $DIALIGN_CONFIG, else ./schema.json.
LabelSchema resolve_schema(const std::string& config, bool required) {
  std::string path = config;
  if (path.empty()) path = env("DIALIGN_CONFIG").value_or("schema.json");
  if (!fs::exists(path)) {
    if (!required && config.empty()) return {};
    throw Error(ErrorCode::IoError, "label schema not found (use --config)", path);
  }
  try {
    return load_schema(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), e.what(), path + ":" + e.path());
  }
}

void write_output(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
    return;
  }
  atomic_write(fs::absolute(path), bytes);
}

std::vector<std::pair<std::string, DialogueCollection>> load_annotations(
    const std::vector<std::string>& paths, const LabelSchema& schema) {
  std::vector<std::pair<std::string, DialogueCollection>> files;
  for (const auto& path : paths) {
    std::string text = read_file(path);
    try {
      files.emplace_back(fs::path(path).stem().string(), parse(text, schema));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), path + ":" + e.path());
    }
  }
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue annotation pipeline: segmentation, validation, agreement, serving"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "Label schema JSON");
  app.add_flag("--json-errors", json_errors, "Print errors as ApiError JSON on stderr");

  auto* segment_cmd = app.add_subcommand("segment", "Segment a raw transcript into dialogues");
  std::string segment_in, segment_out, segment_name;
  segment_cmd->add_option("input", segment_in, "Raw .txt transcript")->required();
  segment_cmd->add_option("-o,--output", segment_out, "Output dataset JSON (default stdout)");
  segment_cmd->add_option("--name", segment_name, "Dataset name (default: input file stem)");

  auto* validate_cmd = app.add_subcommand("validate", "Validate a dataset file against the schema");
  std::string validate_in;
  bool allow_unknown = false;
  validate_cmd->add_option("file", validate_in, "Dataset JSON")->required();
  validate_cmd->add_flag("--allow-unknown-labels", allow_unknown,
                         "Warn about labels missing from the schema instead of failing");

  auto* stats_cmd = app.add_subcommand("stats", "Agreement statistics over annotator copies");
  std::vector<std::string> stats_in;
  stats_cmd->add_option("files", stats_in, "One dataset file per annotator")->required();

  auto* resolve_cmd = app.add_subcommand("resolve", "Merge annotator copies by majority vote");
  std::vector<std::string> resolve_in;
  std::string resolve_out;
  bool majority = false, break_ties = false;
  resolve_cmd->add_option("files", resolve_in, "One dataset file per annotator")->required();
  resolve_cmd->add_option("-o,--output", resolve_out, "Merged dataset JSON")->required();
  resolve_cmd->add_flag("--majority", majority, "Accept every majority default")->required();
  resolve_cmd->add_flag("--break-ties", break_ties, "Also accept tied defaults");

  auto* serve_cmd = app.add_subcommand("serve", "Run the REST server");
  ServerOptions server_options;
  server_options.host = env("DIALIGN_HOST").value_or("127.0.0.1");
  std::string workspace = env("DIALIGN_WORKSPACE").value_or("");
  std::string port_text = env("DIALIGN_PORT").value_or("8000");
  std::string static_dir;
  serve_cmd->add_option("--workspace", workspace, "Workspace directory");
  serve_cmd->add_option("--host", server_options.host, "Listen address");
  serve_cmd->add_option("--port", port_text, "Listen port");
  serve_cmd->add_option("--static-dir", static_dir, "Web UI assets served at /");
  serve_cmd->add_flag("--allow-unknown-labels", allow_unknown,
                      "Keep labels missing from the schema on upload");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*segment_cmd) {
      const LabelSchema schema = resolve_schema(config, false);
      const std::string raw = read_file(segment_in);
      const auto seg = segment(raw);
      const std::string name =
          segment_name.empty() ? fs::path(segment_in).stem().string() : segment_name;
      auto built = to_dialogues(seg, schema, RecommenderRegistry::from_schema(schema), name);
      for (const auto& f : built.failures)
        std::cerr << "dialign: recommender for '" << f.label << "' failed: " << f.message << "\n";
      write_output(segment_out, serialize(built.collection));
      return 0;
    }

    if (*validate_cmd) {
      const LabelSchema schema = resolve_schema(config, true);
      ParseOptions options;
      options.allow_unknown_labels = allow_unknown;
      options.on_warning = [](const std::string& w) { std::cerr << "dialign: warning: " << w << "\n"; };
      const std::string text = read_file(validate_in);
      try {
        const auto collection = parse(text, schema, options);
        std::cout << validate_in << ": ok (" << collection.dialogues.size() << " dialogues)\n";
      } catch (const Error& e) {
        throw Error(e.code(), e.what(), validate_in + ":" + e.path());
      }
      return 0;
    }

    if (*stats_cmd) {
      const LabelSchema schema = resolve_schema(config, true);
      const auto files = load_annotations(stats_in, schema);
      const auto sets = align_collections(files);
      const AnnotationSet all = sets.size() == 1 ? sets.front() : concatenate(sets);
      if (all.annotators.size() < 2)
        throw Error(ErrorCode::TooFewAnnotators, "stats needs at least 2 annotator files");
      std::cout << stats_text(stats(all, schema, detect(all, schema)));
      return 0;
    }

    if (*resolve_cmd) {
      const LabelSchema schema = resolve_schema(config, true);
      const auto files = load_annotations(resolve_in, schema);
      DialogueCollection merged;
      merged.name = fs::path(resolve_out).stem().string();
      std::vector<std::string> ties;
      for (const auto& set : align_collections(files)) {
        auto disagreements = detect(set, schema);
        for (auto& d : disagreements) {
          if (d.tally.tie && !break_ties) {
            ties.push_back(set.dialogue_id + " turn " + std::to_string(d.tally.turn_index) +
                           " label " + d.tally.label);
            continue;
          }
          d = accept(d, *schema.find(d.tally.label));
        }
        if (ties.empty()) merged.dialogues.push_back(export_resolved(set, schema, disagreements));
      }
      if (!ties.empty()) {
        for (const auto& t : ties) std::cerr << "dialign: tie left unresolved: " << t << "\n";
        throw Error(ErrorCode::UnresolvedRemaining,
                    std::to_string(ties.size()) + " tied disagreement(s); rerun with --break-ties");
      }
      write_output(resolve_out, serialize(merged));
      return 0;
    }

    if (*serve_cmd) {
      if (workspace.empty()) throw Error(ErrorCode::IoError, "--workspace is required");
      try {
        std::size_t used = 0;
        server_options.port = std::stoi(port_text, &used);
        if (used != port_text.size()) throw std::invalid_argument(port_text);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "invalid port '" + port_text + "'");
      }
      server_options.static_dir = static_dir;
      WorkspaceOptions options;
      options.allow_unknown_labels = allow_unknown;
      if (!config.empty()) options.schema = resolve_schema(config, true);
      Workspace ws(workspace, options);
      for (const auto& issue : ws.load_issues())
        std::cerr << "dialign: skipped " << issue.path() << ": " << issue.what() << "\n";
      const RecommenderRegistry registry =
          ws.schema() ? RecommenderRegistry::from_schema(*ws.schema()) : RecommenderRegistry{};
      serve(ws, registry, server_options);
      return 0;
    }
  } catch (const Error& e) {
    return report(e);
  }
  return 0;
}
