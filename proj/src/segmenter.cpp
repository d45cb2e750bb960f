#include "dialign/segmenter.hpp"

namespace dialign {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(kWhitespace);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(kWhitespace);
  return s.substr(begin, end - begin + 1);
}

std::string normalize_newlines(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
    out.push_back(raw[i]);
  }
  return out;
}

}  // namespace

RawSegmentation segment(std::string_view raw) {
  const std::string text = normalize_newlines(raw);
  RawSegmentation seg;

  std::vector<std::string> dialogue;
  std::vector<LineSpan> spans;
  std::string utterance;
  LineSpan span;

  auto close_utterance = [&] {
    if (utterance.empty()) return;
    dialogue.push_back(std::move(utterance));
    spans.push_back(span);
    utterance.clear();
  };
  auto close_dialogue = [&] {
    close_utterance();
    if (dialogue.empty()) return;
    seg.dialogues.push_back(std::move(dialogue));
    seg.spans.push_back(std::move(spans));
    dialogue.clear();
    spans.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line = trim(std::string_view(text).substr(pos, nl - pos));
    ++line_no;
    if (line == "===") {
      close_dialogue();
    } else if (line.empty()) {
      close_utterance();
    } else {
      if (utterance.empty()) {
        span.first = line_no;
      } else {
        utterance.push_back(' ');
      }
      utterance.append(line);
      span.last = line_no;
    }
    pos = nl + 1;
  }
  close_dialogue();
  return seg;
}

SegmentedDataset to_dialogues(const RawSegmentation& seg, const LabelSchema& schema,
                              const RecommenderRegistry& recommenders,
                              std::string collection_name) {
  SegmentedDataset out;
  out.collection.name = std::move(collection_name);
  for (const auto& utts : seg.dialogues) {
    Dialogue d;
    d.id = next_dialogue_id(out.collection);
    d.name = d.id;
    for (std::size_t i = 0; i < utts.size(); i += 2) {
      Turn turn;
      turn.index = d.turns.size();
      turn.usr = utts[i];
      if (i + 1 < utts.size()) turn.sys = utts[i + 1];
      auto suggestions = suggest_all(recommenders, schema, turn.usr);
      turn.labels = std::move(suggestions.values);
      for (auto& failure : suggestions.failures) out.failures.push_back(std::move(failure));
      d.turns.push_back(std::move(turn));
    }
    out.collection.dialogues.push_back(std::move(d));
  }
  return out;
}

std::string render(const DialogueCollection& collection) {
  std::string out;
  bool first_dialogue = true;
  for (const auto& utts : utterances(collection)) {
    if (utts.empty()) continue;
    if (!first_dialogue) out += "\n===\n";
    first_dialogue = false;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      if (i > 0) out += "\n\n";
      out += utts[i];
    }
  }
  return out;
}

std::vector<std::vector<std::string>> utterances(const DialogueCollection& collection) {
  std::vector<std::vector<std::string>> out;
  for (const auto& d : collection.dialogues) {
    std::vector<std::string> utts;
    for (const auto& turn : d.turns) {
      utts.push_back(turn.usr);
      if (!turn.sys.empty()) utts.push_back(turn.sys);
    }
    out.push_back(std::move(utts));
  }
  return out;
}

}  // namespace dialign
