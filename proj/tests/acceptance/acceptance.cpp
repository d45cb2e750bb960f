// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "dialign/agreement.hpp"
#include "dialign/codec.hpp"
#include "dialign/error.hpp"
#include "dialign/recommenders.hpp"
#include "dialign/segmenter.hpp"
#include "dialign/server.hpp"
#include "dialign/session.hpp"
#include "dialign/store.hpp"
#include "support/generators.hpp"
#include "support/http.hpp"
#include "support/oracle.hpp"
#include "support/tempdir.hpp"

using namespace dialign;
using dialign::testing::TempDir;
using dialign::testing::TestServer;

namespace {

// Collects the first few failed expectations of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 5) notes_ << (failures_ > 1 ? "; " : "") << what;
  }
  bool ok() const { return failures_ == 0; }
  std::string notes() const { return notes_.str(); }

 private:
  std::size_t failures_ = 0;
  std::ostringstream notes_;
};

using Criterion = std::function<void(Check&)>;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ErrorCode code_of(const std::function<void()>& f, ErrorCode none = ErrorCode::BadRequest) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return none;
}

// --- fixture-scale pipeline ----------------------------------------------------

void fixture_pipeline(Check& check) {
  const auto start = std::chrono::steady_clock::now();
  const LabelSchema schema = gen::three_label_schema();
  const auto counts = gen::turn_counts(154, 3.5, 1.55, 2024);
  check.expect(counts.size() == 154, "dialogue count");
  check.expect(gen::sample_mean(counts) == 3.5, "mean turns " + num(gen::sample_mean(counts)));
  check.expect(std::abs(gen::sample_sd(counts) - 1.55) <= 0.02,
               "sd turns " + num(gen::sample_sd(counts)));
  std::size_t total_turns = 0;
  for (auto c : counts) total_turns += c;

  gen::Rng rng(77);
  const DialogueCollection gold = gen::labelled_collection(schema, counts, rng);

  // Ingest and validate through the store, as an upload would.
  TempDir dir;
  WorkspaceOptions options;
  options.schema = schema;
  Workspace ws(dir.path(), options);
  ws.create_dataset("fixture", parse(serialize(gold), schema));
  check.expect(*ws.dataset("fixture") == gold, "ingested dataset differs from source");

  // Six annotators, each an independently noisy copy shipped as a file.
  std::vector<std::pair<std::string, DialogueCollection>> files;
  for (int a = 0; a < 6; ++a) {
    const auto copy = gen::noisy_copy(gold, schema, rng, 0.15);
    files.emplace_back("annotator" + std::to_string(a + 1), parse(serialize(copy), schema));
  }
  const auto sets = align_collections(files);
  check.expect(sets.size() == 154, "aligned " + std::to_string(sets.size()) + " dialogues");

  DialogueCollection merged;
  merged.name = "fixture-resolved";
  std::size_t disagreements = 0;
  for (const auto& set : sets) {
    // Each dialogue becomes a resolution session; every accept autosaves.
    const auto session = ws.create_session(set);
    const auto& found = session->disagreements;
    disagreements += found.size();
    for (const auto& d : found) {
      const LabelDef& def = *schema.find(d.tally.label);
      const auto votes = set.votes(d.tally.turn_index, def);
      const auto want = oracle::majority(votes, def);
      check.expect(d.tally.default_value == want.default_value && d.tally.tie == want.tie,
                   "majority default disagrees with oracle");
      const auto again = default_from_options(d.tally.options, def, set.annotators.size());
      check.expect(again.default_value == d.tally.default_value && again.tie == d.tally.tie,
                   "default not reproducible from options");
      ws.accept(session->id, d.tally.turn_index, d.tally.label);
    }
    const auto& s = session->stats;
    check.expect(s.kappa >= -1.0 && s.kappa <= 1.0, "dialogue kappa out of range");
    check.expect(s.accuracy >= 0.0 && s.accuracy <= 1.0, "dialogue accuracy out of range");
    check.expect(s.total_errors == found.size(), "total_errors != disagreements");
    check.expect(found.empty() == (s.accuracy == 1.0), "zero-error equivalence");

    const auto resolved = ws.session(session->id);
    check.expect(resolved->unresolved() == 0, "session left unresolved");
    const Dialogue out = export_resolved(*resolved, schema);
    for (std::size_t t = 0; t < out.turns.size(); ++t)
      for (const auto& def : schema.labels) {
        const auto votes = set.votes(t, def);
        const auto want = oracle::majority(votes, def).default_value;
        auto it = out.turns[t].labels.find(def.name);
        const LabelValue got = it == out.turns[t].labels.end() ? empty_value(def.kind) : it->second;
        check.expect(got == want, "merged value is not the majority default");
      }
    merged.dialogues.push_back(out);
  }

  const AnnotationSet corpus = concatenate(sets);
  const auto corpus_found = detect(corpus, schema);
  const auto corpus_stats = stats(corpus, schema, corpus_found);
  check.expect(corpus_stats.total_annotations == 6 * total_turns * 3,
               "total_annotations " + std::to_string(corpus_stats.total_annotations));
  check.expect(corpus_stats.total_errors == disagreements, "corpus errors != sum of dialogues");
  check.expect(corpus_stats.kappa > -1.0 && corpus_stats.kappa < 1.0,
               "corpus kappa " + num(corpus_stats.kappa));
  check.expect(std::abs(corpus_stats.kappa - oracle::pooled_kappa(corpus, schema)) <= 1e-12,
               "corpus kappa differs from oracle");

  ws.create_dataset("fixture-resolved", merged);
  check.expect(read_file(ws.dataset_path("fixture-resolved")) == serialize(merged),
               "exported bytes differ");
  check.expect(parse(serialize(merged), schema) == merged, "merged export does not round-trip");

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check.expect(seconds < 5.0, "pipeline took " + num(seconds) + " s");
  std::cout << "  fixture: 154 dialogues, " << total_turns << " turns, sd "
            << gen::sample_sd(counts) << ", " << disagreements << " disagreements, kappa "
            << corpus_stats.kappa << ", accuracy " << corpus_stats.accuracy << ", " << seconds
            << " s\n";
}

// --- kappa oracle --------------------------------------------------------------------

// Every label has at most three distinct outcomes.
LabelSchema small_schema(gen::Rng& rng) {
  LabelSchema schema;
  const auto labels = std::uniform_int_distribution<int>(1, 2)(rng);
  for (int l = 0; l < labels; ++l) {
    const auto kind = std::uniform_int_distribution<int>(0, 2)(rng);
    const std::string name = "l" + std::to_string(l);
    if (kind == 0)
      schema.labels.push_back({name, LabelKind::Classification, Cardinality::Single, {"A", "B"}, {}});
    else if (kind == 1)
      schema.labels.push_back({name, LabelKind::Classification, Cardinality::Multi, {"A"}, {}});
    else
      schema.labels.push_back({name, LabelKind::SlotValue, std::nullopt, {"slot"}, {}});
  }
  return schema;
}

void kappa_oracle(Check& check) {
  const std::vector<LabelValue> a = {Classification{{"A"}}, Classification{{"A"}},
                                     Classification{{"B"}}, Classification{{"B"}}};
  const std::vector<LabelValue> b = {Classification{{"A"}}, Classification{{"B"}},
                                     Classification{{"B"}}, Classification{{"B"}}};
  check.expect(cohen_kappa(a, b) == 0.5, "worked example gives " + num(cohen_kappa(a, b)));

  gen::Rng rng(1234);
  std::size_t cases = 0;
  double worst = 0.0;
  for (int i = 0; i < 1500; ++i) {
    const auto schema = small_schema(rng);
    const auto annotators = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
    const auto turns = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    const auto set = gen::random_annotation_set(schema, rng, annotators, turns);
    const double got = kappa(set, schema);
    const double want = oracle::pooled_kappa(set, schema);
    worst = std::max(worst, std::abs(got - want));
    check.expect(std::abs(got - want) <= 1e-12, "case " + std::to_string(i) + ": " + num(got) +
                                                    " vs " + num(want));
    // Pairwise values individually as well.
    for (const auto& def : schema.labels) {
      std::vector<std::vector<LabelValue>> seqs;
      for (const auto& [id, d] : set.annotators) {
        std::vector<LabelValue> seq;
        for (std::size_t t = 0; t < turns; ++t) {
          auto it = d.turns[t].labels.find(def.name);
          seq.push_back(it == d.turns[t].labels.end() ? empty_value(def.kind) : it->second);
        }
        seqs.push_back(std::move(seq));
      }
      for (std::size_t x = 0; x < seqs.size(); ++x)
        for (std::size_t y = x + 1; y < seqs.size(); ++y) {
          std::vector<std::string> cx, cy;
          for (const auto& v : seqs[x]) cx.push_back(oracle::category(v));
          for (const auto& v : seqs[y]) cy.push_back(oracle::category(v));
          const double pair = cohen_kappa(seqs[x], seqs[y]);
          check.expect(std::abs(pair - oracle::confusion_kappa(cx, cy)) <= 1e-12,
                       "pairwise kappa differs from oracle");
        }
    }
    ++cases;
  }
  check.expect(cases >= 1000, "only " + std::to_string(cases) + " cases");
  std::cout << "  kappa: " << cases << " random cases, max |diff| " << worst << "\n";
}

// --- identity, bounds, permutation ------------------------------------------------------

AnnotationSet permuted(const AnnotationSet& set, gen::Rng& rng) {
  std::vector<const Dialogue*> copies;
  for (const auto& [id, d] : set.annotators) copies.push_back(&d);
  std::shuffle(copies.begin(), copies.end(), rng);
  AnnotationSet out;
  out.dialogue_id = set.dialogue_id;
  for (std::size_t i = 0; i < copies.size(); ++i)
    out.annotators.emplace("z" + std::to_string(i), *copies[i]);
  return out;
}

void identity_and_bounds(Check& check) {
  gen::Rng rng(555);
  for (int i = 0; i < 500; ++i) {
    const auto schema = gen::random_schema(rng);
    const auto n = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const auto turns = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    auto set = gen::random_annotation_set(schema, rng, n, turns);

    const auto found = detect(set, schema);
    const auto s = stats(set, schema, found);
    const auto report = kappa_report(set, schema);
    check.expect(s.kappa >= -1.0 && s.kappa <= 1.0, "kappa out of range: " + num(s.kappa));
    check.expect(report.per_turn_mean >= -1.0 && report.per_turn_mean <= 1.0,
                 "per-turn kappa out of range");
    for (double k : report.per_turn) check.expect(k >= -1.0 && k <= 1.0, "per-turn kappa out of range");
    check.expect(s.accuracy >= 0.0 && s.accuracy <= 1.0, "accuracy out of range");

    for (int p = 0; p < 3; ++p) {
      const auto other = permuted(set, rng);
      const auto found2 = detect(other, schema);
      bool same = found2.size() == found.size();
      for (std::size_t d = 0; same && d < found.size(); ++d)
        same = found2[d].tally.turn_index == found[d].tally.turn_index &&
               found2[d].tally.label == found[d].tally.label &&
               found2[d].tally.options == found[d].tally.options &&
               found2[d].tally.default_value == found[d].tally.default_value &&
               found2[d].tally.tie == found[d].tally.tie;
      check.expect(same, "detect depends on annotator order");
      check.expect(stats(other, schema, found2) == s, "stats depend on annotator order");
      check.expect(kappa_report(other, schema).per_turn == report.per_turn,
                   "per-turn kappa depends on annotator order");
    }

    const Dialogue first = set.annotators.begin()->second;
    for (auto& [id, d] : set.annotators) d = first;
    const auto none = detect(set, schema);
    const auto perfect = stats(set, schema, none);
    check.expect(none.empty(), "identical copies disagree");
    check.expect(perfect.kappa == 1.0, "identical copies kappa " + num(perfect.kappa));
    check.expect(perfect.total_errors == 0, "identical copies have errors");
    check.expect(perfect.accuracy == 1.0, "identical copies accuracy " + num(perfect.accuracy));
  }
}

// --- segmentation ---------------------------------------------------------------------

void segmentation(Check& check) {
  std::size_t cases = 0;
  for (const auto& entry : fs::directory_iterator(std::string(DIALIGN_TEST_DATA) + "/segmentation")) {
    if (entry.path().extension() != ".txt") continue;
    ++cases;
    auto golden = entry.path();
    golden.replace_extension(".json");
    const std::string got = dump_canonical(segmentation_to_json(segment(read_file(entry.path()))));
    check.expect(got == read_file(golden), entry.path().filename().string() + " differs from golden");
  }
  check.expect(cases >= 20, "only " + std::to_string(cases) + " golden cases");

  gen::Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto c = gen::random_collection(gen::random_schema(rng), rng, 5, 6);
    check.expect(segment(render(c)).dialogues == utterances(c),
                 "round trip failed on collection " + std::to_string(i));
  }
  std::cout << "  segmentation: " << cases << " golden cases, 1000 round trips\n";
}

// --- serialization -----------------------------------------------------------------------

void serialization(Check& check) {
  gen::Rng rng(2718);
  for (int i = 0; i < 1000; ++i) {
    const auto schema = gen::random_schema(rng);
    const auto c = gen::random_collection(schema, rng, 5, 6);
    const std::string text = serialize(c);
    const auto back = parse(text, schema);
    check.expect(back == c, "round trip failed on collection " + std::to_string(i));
    check.expect(serialize(back) == text, "serialize not deterministic on " + std::to_string(i));
  }

  TempDir dir;
  const auto schema = gen::random_schema(rng);
  atomic_write(dir.path() / "schema.json", schema_to_config(schema));
  Workspace ws(dir.path());
  RecommenderRegistry registry;
  TestServer server([&](httplib::Server& s) { install_routes(s, ws, registry); });
  auto client = server.client();
  for (int i = 0; i < 20; ++i) {
    const std::string name = "set" + std::to_string(i);
    const auto c = gen::random_collection(schema, rng, 5, 6);
    auto res = client.Post("/api/datasets?name=" + name, serialize(c), "application/json");
    check.expect(res && res->status == 201, "upload of " + name + " failed");
    if (i % 2 == 0) {
      auto edit = client.Post("/api/datasets/" + name + "/dialogues", "{\"name\":\"café\"}",
                              "application/json");
      check.expect(edit && edit->status == 201, "edit of " + name + " failed");
    }
    auto exported = client.Get("/api/datasets/" + name + "/export");
    check.expect(exported && exported->status == 200, "export of " + name + " failed");
    if (exported)
      check.expect(exported->body == read_file(ws.dataset_path(name)),
                   "export bytes differ from disk for " + name);
  }
  std::cout << "  serialization: 1000 round trips, 20 export comparisons\n";
}

// --- recommender contract -------------------------------------------------------------------

void recommender_contract(Check& check) {
  TestServer stub([](httplib::Server& s) {
    s.Post("/valid", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      const bool shaped = body.size() == 2 && body["label"] == "intent" && body["query"].is_string();
      res.status = shaped ? 200 : 400;
      res.set_content(R"({"value":{"kind":"classification","selected":["request"]}})",
                      "application/json");
    });
    s.Post("/invalid", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"value":{"kind":"classification","selected":["bogus"]}})",
                      "application/json");
    });
    s.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1200));
      res.set_content(R"({"value":{"kind":"classification","selected":["x"]}})", "application/json");
    });
  });

  Json config = {{"labels", Json::array()}};
  auto label = [&](const std::string& name, const std::string& path, int timeout) {
    config["labels"].push_back({{"name", name},
                                {"kind", "classification"},
                                {"cardinality", "single"},
                                {"values", {"inform", "request", "x"}},
                                {"recommender",
                                 {{"type", "external"}, {"url", stub.url(path)}, {"timeout_ms", timeout}}}});
  };
  label("intent", "/valid", 2000);
  label("checked", "/invalid", 2000);
  label("slow", "/slow", 200);

  TempDir dir;
  atomic_write(dir.path() / "schema.json", config.dump());
  {
    Workspace ws(dir.path());
    const auto registry = RecommenderRegistry::from_schema(*ws.schema());
    check.expect(code_of([&] { transform(registry.bindings().at("checked"),
                                         *ws.schema()->find("checked"), "q"); }) ==
                     ErrorCode::InvalidPrediction,
                 "invalid class not rejected as InvalidPrediction");

    DialogueCollection blank;
    blank.dialogues.push_back({"dialogue-0001", "new", {}});
    ws.create_dataset("live", blank);
    TestServer api([&](httplib::Server& s) { install_routes(s, ws, registry); });
    auto client = api.client();
    auto res = client.Post("/api/datasets/live/dialogues/dialogue-0001/turns",
                           R"({"usr":"where is the museum?"})", "application/json");
    check.expect(res && res->status == 201, "turn creation failed");
    if (res && res->status == 201) {
      const auto body = Json::parse(res->body);
      const auto& labels = body["turn"]["labels"];
      check.expect(labels.contains("intent") && labels["intent"]["selected"] == Json{"request"},
                   "valid prediction missing");
      check.expect(!labels.contains("checked"), "invalid prediction stored");
      check.expect(!labels.contains("slow"), "timed-out label not blank");
      std::map<std::string, std::string> codes;
      for (const auto& f : body["failures"]) codes[f["label"]] = f["code"];
      check.expect(codes["checked"] == "InvalidPrediction", "failure code for invalid class");
      check.expect(codes["slow"] == "ExternalTimeout", "failure code for timeout");
      check.expect(codes.size() == 2, "unexpected failures");
    }
  }
  Workspace reloaded(dir.path());
  const auto& turns = reloaded.dataset("live")->dialogues.at(0).turns;
  check.expect(turns.size() == 1, "turn not persisted");
  if (!turns.empty()) {
    check.expect(turns[0].labels.count("intent") == 1 &&
                     turns[0].labels.at("intent") == LabelValue{Classification{{"request"}}},
                 "valid prediction not persisted");
    check.expect(turns[0].labels.size() == 1, "failed labels persisted");
  }
}

// --- durability --------------------------------------------------------------------------------

struct Crash {};

void durability(Check& check) {
  const LabelSchema schema = gen::three_label_schema();
  TempDir dir;
  atomic_write(dir.path() / "schema.json", schema_to_config(schema));
  gen::Rng rng(31337);
  const auto gold = gen::labelled_collection(schema, {3, 2, 4}, rng);

  // Dataset edits: every edit kind, each first attempted with a crash between
  // the durable temp file and the rename.
  {
    Workspace ws(dir.path());
    ws.create_dataset("data", gold);
    Turn extra{0, "one more", "ok", {}, {}};
    const std::vector<DatasetEdit> edits = {
        AddDialogue{"added"},
        RenameDialogue{"dialogue-0001", "renamed"},
        AddTurn{"dialogue-0002", extra},
        UpdateTurn{"dialogue-0001", 1, extra},
        DeleteTurn{"dialogue-0003", 0},
        ReplaceDialogue{"dialogue-0002", gold.dialogues[0]},
        DeleteDialogue{"dialogue-0004"},
    };
    for (std::size_t i = 0; i < edits.size(); ++i) {
      const std::string before = read_file(ws.dataset_path("data"));
      const auto snapshot = ws.dataset("data");
      ws.set_fault_hook([](const fs::path&, const fs::path&) { throw Crash{}; });
      bool crashed = false;
      try {
        ws.mutate("data", edits[i]);
      } catch (const Crash&) {
        crashed = true;
      }
      ws.set_fault_hook({});
      check.expect(crashed, "edit " + std::to_string(i) + " did not reach the fault point");
      check.expect(read_file(ws.dataset_path("data")) == before,
                   "crash in edit " + std::to_string(i) + " changed the file");
      check.expect(*ws.dataset("data") == *snapshot,
                   "crash in edit " + std::to_string(i) + " changed memory");
      Workspace probe(dir.path());
      check.expect(probe.load_issues().empty() && *probe.dataset("data") == *snapshot,
                   "reload after crash " + std::to_string(i) + " differs");

      ws.mutate("data", edits[i]);
      Workspace after(dir.path());
      check.expect(*after.dataset("data") == *ws.dataset("data"),
                   "reload after edit " + std::to_string(i) + " differs");
    }
  }

  // Resolution: crash on every other accept, then reload and compare.
  std::vector<std::pair<std::string, DialogueCollection>> files;
  for (int a = 0; a < 3; ++a)
    files.emplace_back("a" + std::to_string(a), gen::noisy_copy(gold, schema, rng, 0.5));
  std::map<std::string, std::vector<Disagreement>> expected;
  {
    Workspace ws(dir.path());
    for (auto& set : align_collections(files)) {
      const auto session = ws.create_session(std::move(set));
      for (std::size_t k = 0; k < session->disagreements.size(); ++k) {
        const auto& d = session->disagreements[k];
        std::optional<LabelValue> override_value;
        if (k % 3 == 1) override_value = empty_value(LabelKind::Classification);
        if (k % 2 == 0) {
          const std::string before = read_file(ws.session_path(session->id));
          ws.set_fault_hook([](const fs::path&, const fs::path&) { throw Crash{}; });
          try {
            ws.accept(session->id, d.tally.turn_index, d.tally.label, override_value);
            check.expect(false, "accept did not reach the fault point");
          } catch (const Crash&) {
          }
          ws.set_fault_hook({});
          check.expect(read_file(ws.session_path(session->id)) == before,
                       "crash during accept changed the session file");
          check.expect(ws.session(session->id)->disagreements[k].status ==
                           ResolutionStatus::Unresolved,
                       "crash during accept changed memory");
        }
        ws.accept(session->id, d.tally.turn_index, d.tally.label, override_value);
      }
      expected[session->id] = ws.session(session->id)->disagreements;
    }
  }
  Workspace reloaded(dir.path());
  check.expect(reloaded.load_issues().empty(), "reload reported issues");
  std::size_t accepted = 0;
  for (const auto& [id, want] : expected) {
    const auto got = reloaded.session(id);
    bool same = got->disagreements.size() == want.size();
    for (std::size_t k = 0; same && k < want.size(); ++k) {
      same = got->disagreements[k].status == ResolutionStatus::Accepted &&
             got->disagreements[k].resolved_value == want[k].resolved_value;
      ++accepted;
    }
    check.expect(same, "session " + id + " resolutions not reproduced");
    check.expect(got->unresolved() == 0, "session " + id + " has unresolved items after reload");
  }
  check.expect(accepted > 0, "no disagreements were generated");
  std::cout << "  durability: " << expected.size() << " sessions, " << accepted
            << " accepted resolutions reloaded\n";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Criterion>> criteria = {
      {"fixture-scale pipeline", fixture_pipeline},
      {"kappa oracle equivalence", kappa_oracle},
      {"identity and bound checks", identity_and_bounds},
      {"segmentation golden suite", segmentation},
      {"serialization round-trip", serialization},
      {"recommender contract", recommender_contract},
      {"durability", durability},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check check;
    try {
      run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    if (check.ok()) {
      std::cout << "PASS " << name << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << name << ": " << check.notes() << "\n";
    }
  }
  return failed == 0 ? 0 : 1;
}
