#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coldrec/trace.hpp"

namespace coldrec {

enum class StrategyKind { DirectRec, BaseReason, FastReason, Structural, SoftSelfConsistency };

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::DirectRec, StrategyKind::BaseReason,
                                                  StrategyKind::FastReason, StrategyKind::Structural,
                                                  StrategyKind::SoftSelfConsistency};

/// Snake-case name used in files, tags and CLI flags (e.g. "direct_rec").
std::string_view to_string(StrategyKind kind);
/// Accepts the snake-case name or the upper-case enum spelling.
StrategyKind parse_strategy(std::string_view text);

/// Everything produced by running one strategy on one task.
struct StrategyOutcome {
  std::string task_id;
  StrategyKind strategy = StrategyKind::DirectRec;
  std::string template_version;
  std::vector<std::string> raw_texts;
  ParseResult<ParsedTrace> trace = ParseFailure{};
  ParseResult<int> final_pick = ParseFailure{};
  double reward = -1.0;
  /// Harness-recomputed ordering of all candidates (Structural only).
  std::optional<std::vector<int>> harness_ranking;
  /// Structural only: the model's own top pick or ranking disagreed with
  /// the recomputed one.
  bool ranking_disagrees = false;
  int target_index = 0;
  bool target_discovery = false;

  /// Rendered prompts, in call order. Kept in memory only; outcomes.jsonl
  /// records template_version instead.
  std::vector<std::string> prompts;

  bool parse_failed() const { return std::holds_alternative<ParseFailure>(final_pick); }
};

std::string outcome_to_json(const StrategyOutcome& outcome);
StrategyOutcome outcome_from_json(std::string_view line);
void save_outcomes(const std::string& path, const std::vector<StrategyOutcome>& outcomes);
std::vector<StrategyOutcome> load_outcomes(const std::string& path);

}  // namespace coldrec
