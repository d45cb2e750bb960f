#pragma once

// Inter-annotator disagreement detection, majority-vote defaults and agreement
// statistics over N annotator copies of one dialogue.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialign/model.hpp"

namespace dialign {

// N annotator copies of the same dialogue. All copies share the turn count
// and the usr/sys texts; only labels differ.
struct AnnotationSet {
  std::string dialogue_id;
  std::map<std::string, Dialogue> annotators;  // annotator id -> copy

  std::size_t turn_count() const;
  // Annotator values for one (turn, label), absent labels as the empty value.
  std::vector<LabelValue> votes(std::size_t turn, const LabelDef& def) const;
};

// Throws TooFewAnnotators, DuplicateAnnotator, ValidationError (dialogue ids
// differ), TurnCountMismatch, UtteranceTextMismatch.
AnnotationSet align(std::vector<std::pair<std::string, Dialogue>> copies);

// Groups every dialogue of every annotator file by dialogue id, then aligns
// each group. Sets come back in dialogue-id order.
std::vector<AnnotationSet> align_collections(
    const std::vector<std::pair<std::string, DialogueCollection>>& files);

// Joins several sets with the same annotators into one whose turns are the
// concatenation (in the given order). Used for corpus-level statistics.
AnnotationSet concatenate(const std::vector<AnnotationSet>& sets, std::string id = "*");

// One atomic candidate: a single class, or a single slot=value pair.
struct VoteOption {
  LabelValue value;
  std::size_t count = 0;
  double share = 0.0;  // count / annotators
  friend bool operator==(const VoteOption&, const VoteOption&) = default;
};

struct MajorityResult {
  LabelValue default_value;
  std::vector<VoteOption> options;
  bool tie = false;
};

// Multi-valued classification: a class is in the default iff its share is
// above 0.5; a share of exactly 0.5 is excluded and flags a tie.
// Single-valued classification: plurality class, ties broken by schema order
// (an empty selection loses every tie). Slot values: per-slot plurality over
// value strings where an absent slot is a candidate too; ties go to the
// smallest string, absent last.
MajorityResult majority_default(std::span<const LabelValue> votes, const LabelDef& def,
                                std::size_t annotators);

// Recomputes default and tie from a stored option list. Counts missing from
// the list are votes for the empty value.
MajorityResult default_from_options(std::vector<VoteOption> options, const LabelDef& def,
                                    std::size_t annotators);

struct VoteTally {
  std::size_t turn_index = 0;
  std::string label;
  std::vector<VoteOption> options;
  LabelValue default_value;
  bool tie = false;
};

enum class ResolutionStatus { Unresolved, Accepted };

struct Disagreement {
  VoteTally tally;
  ResolutionStatus status = ResolutionStatus::Unresolved;
  std::optional<LabelValue> resolved_value;
};

// One entry per (turn, label) whose annotator values are not all equal,
// ordered by turn then schema order.
std::vector<Disagreement> detect(const AnnotationSet& set, const LabelSchema& schema);

// Marks a disagreement accepted with `value`, or with the majority default
// when no value is given. Throws AlreadyAccepted, InvalidValue.
Disagreement accept(const Disagreement& d, const LabelDef& def,
                    std::optional<LabelValue> value = std::nullopt);

// Cohen's kappa between two annotators' outcomes over the same items, with
// exact-value categories. When chance agreement is 1 the result is 1 if the
// annotators agree everywhere and 0 otherwise; no items gives 1.
double cohen_kappa(std::span<const LabelValue> a, std::span<const LabelValue> b);

struct KappaReport {
  // Mean of pairwise kappa over annotator pairs and labels (canonical).
  double pooled = 1.0;
  // Per turn: observed agreement on that turn against the pairwise chance
  // agreement. Above chance it is scaled like kappa, below chance by the
  // chance agreement itself, so every value stays in [-1, 1].
  std::vector<double> per_turn;
  double per_turn_mean = 1.0;
};

// Throws TooFewAnnotators.
KappaReport kappa_report(const AnnotationSet& set, const LabelSchema& schema);
double kappa(const AnnotationSet& set, const LabelSchema& schema);

struct AgreementStats {
  double kappa = 1.0;
  std::size_t total_annotations = 0;
  std::size_t total_errors = 0;
  double accuracy = 1.0;
  friend bool operator==(const AgreementStats&, const AgreementStats&) = default;
};

AgreementStats stats(const AnnotationSet& set, const LabelSchema& schema,
                     std::span<const Disagreement> disagreements);

// Merged dialogue: agreed values copied, disputed ones replaced by their
// resolution. Throws UnresolvedRemaining.
Dialogue export_resolved(const AnnotationSet& set, const LabelSchema& schema,
                         std::span<const Disagreement> disagreements);

}  // namespace dialign
