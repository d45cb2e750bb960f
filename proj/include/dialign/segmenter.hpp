#pragma once

// Raw transcription text -> dialogues.
//
// Grammar: a line whose trimmed content is exactly "===" ends a dialogue; one
// or more blank (whitespace-only) lines end an utterance; the non-blank lines
// of one utterance are trimmed and joined with a single space. Utterances
// alternate user/system, user first.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dialign/model.hpp"
#include "dialign/recommenders.hpp"

namespace dialign {

// 1-based inclusive line range of one utterance in the (LF-normalized) input.
struct LineSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const LineSpan&, const LineSpan&) = default;
};

struct RawSegmentation {
  std::vector<std::vector<std::string>> dialogues;
  // Parallel to `dialogues`: one span per utterance.
  std::vector<std::vector<LineSpan>> spans;

  friend bool operator==(const RawSegmentation&, const RawSegmentation&) = default;
};

RawSegmentation segment(std::string_view raw);

struct SegmentedDataset {
  DialogueCollection collection;
  std::vector<RecommenderFailure> failures;
};

// Pairs utterances into turns (usr, sys), user first; an odd trailing
// utterance becomes a turn with empty sys. Every user query runs through the
// bound recommenders; failed suggestions leave the label absent.
SegmentedDataset to_dialogues(const RawSegmentation& seg, const LabelSchema& schema,
                              const RecommenderRegistry& recommenders,
                              std::string collection_name = {});

// Inverse of segment(): one blank line between utterances, a "===" line
// between dialogues. Labels are dropped.
std::string render(const DialogueCollection& collection);

// Utterance lists per dialogue, in speaking order.
std::vector<std::vector<std::string>> utterances(const DialogueCollection& collection);

}  // namespace dialign
