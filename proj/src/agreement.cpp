#include "dialign/agreement.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "dialign/error.hpp"

namespace dialign {

std::size_t AnnotationSet::turn_count() const {
  return annotators.empty() ? 0 : annotators.begin()->second.turns.size();
}

std::vector<LabelValue> AnnotationSet::votes(std::size_t turn, const LabelDef& def) const {
  std::vector<LabelValue> out;
  out.reserve(annotators.size());
  for (const auto& [id, dialogue] : annotators) {
    const auto& labels = dialogue.turns.at(turn).labels;
    auto it = labels.find(def.name);
    out.push_back(it == labels.end() ? empty_value(def.kind) : it->second);
  }
  return out;
}

AnnotationSet align(std::vector<std::pair<std::string, Dialogue>> copies) {
  if (copies.size() < 2)
    throw Error(ErrorCode::TooFewAnnotators,
                "resolution needs at least 2 annotators, got " + std::to_string(copies.size()),
                copies.empty() ? "" : copies.front().second.id);
  AnnotationSet set;
  set.dialogue_id = copies.front().second.id;
  const Dialogue& reference = copies.front().second;
  for (auto& [annotator, dialogue] : copies) {
    if (dialogue.id != set.dialogue_id)
      throw Error(ErrorCode::ValidationError,
                  "annotator '" + annotator + "' supplied dialogue '" + dialogue.id +
                      "', expected '" + set.dialogue_id + "'");
    if (dialogue.turns.size() != reference.turns.size())
      throw Error(ErrorCode::TurnCountMismatch,
                  "annotator '" + annotator + "' has " + std::to_string(dialogue.turns.size()) +
                      " turns, expected " + std::to_string(reference.turns.size()),
                  set.dialogue_id);
    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
      const Turn& a = dialogue.turns[t];
      const Turn& b = reference.turns[t];
      if (a.usr != b.usr || a.sys != b.sys)
        throw Error(ErrorCode::UtteranceTextMismatch,
                    "annotator '" + annotator + "' differs in utterance text at turn " +
                        std::to_string(t),
                    set.dialogue_id + "/turns/" + std::to_string(t));
    }
  }
  for (auto& [annotator, dialogue] : copies) {
    if (!set.annotators.emplace(annotator, std::move(dialogue)).second)
      throw Error(ErrorCode::DuplicateAnnotator, "annotator '" + annotator + "' appears twice",
                  set.dialogue_id);
  }
  return set;
}

std::vector<AnnotationSet> align_collections(
    const std::vector<std::pair<std::string, DialogueCollection>>& files) {
  std::map<std::string, std::vector<std::pair<std::string, Dialogue>>> groups;
  for (const auto& [annotator, collection] : files)
    for (const auto& d : collection.dialogues) groups[d.id].emplace_back(annotator, d);
  if (groups.empty() && files.size() < 2)
    throw Error(ErrorCode::TooFewAnnotators,
                "resolution needs at least 2 annotators, got " + std::to_string(files.size()));
  std::vector<AnnotationSet> sets;
  sets.reserve(groups.size());
  for (auto& [id, copies] : groups) sets.push_back(align(std::move(copies)));
  return sets;
}

AnnotationSet concatenate(const std::vector<AnnotationSet>& sets, std::string id) {
  AnnotationSet out;
  out.dialogue_id = id;
  if (sets.empty()) return out;
  for (const auto& [annotator, d] : sets.front().annotators) {
    Dialogue merged;
    merged.id = id;
    merged.name = id;
    out.annotators.emplace(annotator, std::move(merged));
  }
  for (const auto& set : sets) {
    if (set.annotators.size() != out.annotators.size())
      throw Error(ErrorCode::ValidationError,
                  "dialogue '" + set.dialogue_id + "' has a different annotator set");
    for (const auto& [annotator, d] : set.annotators) {
      auto it = out.annotators.find(annotator);
      if (it == out.annotators.end())
        throw Error(ErrorCode::ValidationError, "annotator '" + annotator +
                                                    "' is missing from other dialogues");
      for (const auto& turn : d.turns) {
        it->second.turns.push_back(turn);
        it->second.turns.back().index = it->second.turns.size() - 1;
      }
    }
  }
  return out;
}

// --- majority ---------------------------------------------------------------

namespace {

double share_of(std::size_t count, std::size_t annotators) {
  return annotators == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(annotators);
}

}  // namespace

MajorityResult majority_default(std::span<const LabelValue> votes, const LabelDef& def,
                                std::size_t annotators) {
  std::vector<VoteOption> options;
  if (def.kind == LabelKind::Classification) {
    std::map<std::string, std::size_t> counts;
    for (const auto& vote : votes)
      for (const auto& name : std::get<Classification>(vote).selected) ++counts[name];
    for (const auto& name : def.values) {
      auto it = counts.find(name);
      if (it == counts.end()) continue;
      options.push_back({Classification{{name}}, it->second, share_of(it->second, annotators)});
    }
  } else {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (const auto& vote : votes)
      for (const auto& [slot, value] : std::get<SlotValue>(vote).pairs) ++counts[slot][value];
    for (const auto& slot : def.values) {
      auto it = counts.find(slot);
      if (it == counts.end()) continue;
      for (const auto& [value, count] : it->second)
        options.push_back({SlotValue{{{slot, value}}}, count, share_of(count, annotators)});
    }
  }
  return default_from_options(std::move(options), def, annotators);
}

MajorityResult default_from_options(std::vector<VoteOption> options, const LabelDef& def,
                                    std::size_t annotators) {
  MajorityResult result;
  result.default_value = empty_value(def.kind);

  if (def.kind == LabelKind::Classification) {
    auto& chosen = std::get<Classification>(result.default_value).selected;
    if (def.cardinality.value_or(Cardinality::Multi) == Cardinality::Multi) {
      for (const auto& option : options) {
        const auto& name = *std::get<Classification>(option.value).selected.begin();
        if (2 * option.count > annotators) chosen.insert(name);
        else if (2 * option.count == annotators) result.tie = true;
      }
    } else {
      // Options are in schema order, so the first maximum wins ties.
      std::size_t voted = 0;
      const VoteOption* best = nullptr;
      std::size_t at_best = 0;
      for (const auto& option : options) {
        voted += option.count;
        if (best == nullptr || option.count > best->count) {
          best = &option;
          at_best = 1;
        } else if (option.count == best->count) {
          ++at_best;
        }
      }
      const std::size_t empty_votes = annotators - std::min(voted, annotators);
      if (best == nullptr || empty_votes > best->count) {
        result.tie = false;
      } else {
        if (empty_votes == best->count) ++at_best;
        chosen = std::get<Classification>(best->value).selected;
        result.tie = at_best > 1;
      }
    }
  } else {
    auto& pairs = std::get<SlotValue>(result.default_value).pairs;
    std::map<std::string, std::vector<const VoteOption*>> by_slot;
    for (const auto& option : options)
      by_slot[std::get<SlotValue>(option.value).pairs.begin()->first].push_back(&option);
    for (const auto& [slot, candidates] : by_slot) {
      std::size_t voted = 0;
      std::size_t top = 0;
      for (const VoteOption* option : candidates) {
        voted += option->count;
        top = std::max(top, option->count);
      }
      std::size_t at_top = 0;
      const std::string* winner = nullptr;
      for (const VoteOption* option : candidates) {
        if (option->count != top) continue;
        ++at_top;
        const auto& value = std::get<SlotValue>(option->value).pairs.begin()->second;
        if (winner == nullptr || value < *winner) winner = &value;
      }
      const std::size_t absent = annotators - std::min(voted, annotators);
      if (absent > top) continue;
      if (absent == top) ++at_top;
      if (at_top > 1) result.tie = true;
      pairs.emplace(slot, *winner);
    }
  }
  result.options = std::move(options);
  return result;
}

// --- detection and resolution ------------------------------------------------

std::vector<Disagreement> detect(const AnnotationSet& set, const LabelSchema& schema) {
  std::vector<Disagreement> out;
  const std::size_t n = set.annotators.size();
  for (std::size_t t = 0; t < set.turn_count(); ++t) {
    for (const auto& def : schema.labels) {
      const auto votes = set.votes(t, def);
      const bool unanimous = std::all_of(votes.begin(), votes.end(),
                                         [&](const LabelValue& v) { return v == votes.front(); });
      if (unanimous) continue;
      auto majority = majority_default(votes, def, n);
      Disagreement d;
      d.tally = {t, def.name, std::move(majority.options), std::move(majority.default_value),
                 majority.tie};
      out.push_back(std::move(d));
    }
  }
  return out;
}

Disagreement accept(const Disagreement& d, const LabelDef& def, std::optional<LabelValue> value) {
  if (d.status == ResolutionStatus::Accepted)
    throw Error(ErrorCode::AlreadyAccepted,
                "turn " + std::to_string(d.tally.turn_index) + " label '" + d.tally.label +
                    "' is already accepted");
  LabelValue chosen = value ? std::move(*value) : d.tally.default_value;
  try {
    validate_value(def, chosen);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidValue, e.what(), e.path());
  }
  Disagreement out = d;
  out.status = ResolutionStatus::Accepted;
  out.resolved_value = std::move(chosen);
  return out;
}

// --- kappa ---------------------------------------------------------------------

namespace {

struct PairCounts {
  std::size_t items = 0;
  std::size_t agreements = 0;
  std::size_t chance = 0;  // sum over categories of count_a * count_b
};

PairCounts count_pair(std::span<const LabelValue> a, std::span<const LabelValue> b) {
  PairCounts c;
  c.items = a.size();
  std::map<LabelValue, std::pair<std::size_t, std::size_t>> marginals;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++c.agreements;
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  for (const auto& [value, counts] : marginals) c.chance += counts.first * counts.second;
  return c;
}

double kappa_of(const PairCounts& c) {
  const std::size_t total = c.items * c.items;
  if (c.chance == total) return c.agreements == c.items ? 1.0 : 0.0;
  const double observed = static_cast<double>(c.agreements * c.items) - static_cast<double>(c.chance);
  return observed / static_cast<double>(total - c.chance);
}

// Sum in a canonical order so results do not depend on annotator order.
double sorted_mean(std::vector<double> values, double fallback) {
  if (values.empty()) return fallback;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

double cohen_kappa(std::span<const LabelValue> a, std::span<const LabelValue> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::ValidationError, "kappa needs equally long outcome sequences");
  return kappa_of(count_pair(a, b));
}

KappaReport kappa_report(const AnnotationSet& set, const LabelSchema& schema) {
  const std::size_t n = set.annotators.size();
  if (n < 2)
    throw Error(ErrorCode::TooFewAnnotators,
                "kappa needs at least 2 annotators, got " + std::to_string(n), set.dialogue_id);
  const std::size_t turns = set.turn_count();

  // outcomes[label][annotator][turn]
  std::vector<std::vector<std::vector<LabelValue>>> outcomes(schema.labels.size(),
                                                             std::vector<std::vector<LabelValue>>(n));
  for (std::size_t t = 0; t < turns; ++t)
    for (std::size_t l = 0; l < schema.labels.size(); ++l) {
      auto votes = set.votes(t, schema.labels[l]);
      for (std::size_t a = 0; a < n; ++a) outcomes[l][a].push_back(std::move(votes[a]));
    }

  std::vector<double> pair_kappas;
  std::vector<double> chance_terms;  // p_e per (label, pair)
  std::vector<std::size_t> turn_agreements(turns, 0);
  for (std::size_t l = 0; l < schema.labels.size(); ++l) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const PairCounts c = count_pair(outcomes[l][a], outcomes[l][b]);
        pair_kappas.push_back(kappa_of(c));
        chance_terms.push_back(turns == 0 ? 1.0
                                          : static_cast<double>(c.chance) /
                                                static_cast<double>(turns * turns));
        for (std::size_t t = 0; t < turns; ++t)
          if (outcomes[l][a][t] == outcomes[l][b][t]) ++turn_agreements[t];
      }
    }
  }

  KappaReport report;
  report.pooled = sorted_mean(pair_kappas, 1.0);
  const std::size_t comparisons = chance_terms.size();
  if (comparisons > 0) {
    const double expected = sorted_mean(chance_terms, 1.0);
    for (std::size_t t = 0; t < turns; ++t) {
      const double observed =
          static_cast<double>(turn_agreements[t]) / static_cast<double>(comparisons);
      if (expected >= 1.0) {
        report.per_turn.push_back(turn_agreements[t] == comparisons ? 1.0 : 0.0);
      } else if (observed >= expected) {
        report.per_turn.push_back((observed - expected) / (1.0 - expected));
      } else {
        // Below chance, scale by the largest possible shortfall so a turn
        // with no agreement at all scores -1.
        report.per_turn.push_back((observed - expected) / expected);
      }
    }
  } else {
    report.per_turn.assign(turns, 1.0);
  }
  double sum = 0.0;
  for (double v : report.per_turn) sum += v;
  report.per_turn_mean =
      report.per_turn.empty() ? 1.0 : sum / static_cast<double>(report.per_turn.size());
  return report;
}

double kappa(const AnnotationSet& set, const LabelSchema& schema) {
  return kappa_report(set, schema).pooled;
}

AgreementStats stats(const AnnotationSet& set, const LabelSchema& schema,
                     std::span<const Disagreement> disagreements) {
  const std::size_t n = set.annotators.size();
  const std::size_t turns = set.turn_count();
  AgreementStats s;
  s.kappa = kappa(set, schema);
  s.total_annotations = n * turns * schema.labels.size();
  s.total_errors = disagreements.size();

  const std::size_t votes_per_turn = n * schema.labels.size();
  double accuracy_sum = 0.0;
  for (std::size_t t = 0; t < turns; ++t) {
    std::size_t matches = 0;
    for (const auto& def : schema.labels) {
      const auto votes = set.votes(t, def);
      const auto majority = majority_default(votes, def, n);
      matches += static_cast<std::size_t>(
          std::count(votes.begin(), votes.end(), majority.default_value));
    }
    accuracy_sum += votes_per_turn == 0 ? 1.0
                                        : static_cast<double>(matches) /
                                              static_cast<double>(votes_per_turn);
  }
  s.accuracy = turns == 0 ? 1.0 : accuracy_sum / static_cast<double>(turns);
  return s;
}

Dialogue export_resolved(const AnnotationSet& set, const LabelSchema& schema,
                         std::span<const Disagreement> disagreements) {
  const auto unresolved = std::count_if(disagreements.begin(), disagreements.end(),
                                        [](const Disagreement& d) {
                                          return d.status != ResolutionStatus::Accepted;
                                        });
  if (unresolved > 0)
    throw Error(ErrorCode::UnresolvedRemaining,
                std::to_string(unresolved) + " disagreement(s) still unresolved",
                set.dialogue_id);
  if (set.annotators.empty())
    throw Error(ErrorCode::TooFewAnnotators, "no annotator copies", set.dialogue_id);

  std::map<std::pair<std::size_t, std::string>, const LabelValue*> resolved;
  for (const auto& d : disagreements)
    resolved[{d.tally.turn_index, d.tally.label}] = &*d.resolved_value;

  Dialogue merged = set.annotators.begin()->second;
  for (std::size_t t = 0; t < merged.turns.size(); ++t) {
    Turn& turn = merged.turns[t];
    turn.labels.clear();
    turn.opaque_labels.clear();
    for (const auto& def : schema.labels) {
      auto it = resolved.find({t, def.name});
      LabelValue value = it != resolved.end() ? *it->second : set.votes(t, def).front();
      if (!is_empty(value)) turn.labels.emplace(def.name, std::move(value));
    }
  }
  return merged;
}

}  // namespace dialign
