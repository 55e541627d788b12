#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coldrec/outcome.hpp"
#include "coldrec/taskgen.hpp"
#include "coldrec/trace.hpp"

namespace coldrec {

inline constexpr double kRewardCorrect = 1.0;
inline constexpr double kRewardIncorrect = -0.1;
inline constexpr double kRewardParseFailure = -1.0;

struct NormalizedWeights {
  std::vector<double> values;
  /// Raw weights summed to zero; values fell back to uniform 1/P.
  bool degenerate = false;
};

/// w_i / sum(w). Throws NegativeWeight for any w_i < 0 (or NaN).
NormalizedWeights normalize_weights(const ImportanceWeights& raw);

/// Aggregated relevance per scored candidate index.
struct ScoreVector {
  std::map<int, double> overall;

  bool operator==(const ScoreVector&) const = default;
};

/// overall(c) = sum_p w_p * m[p][c] with normalized weights.
ScoreVector aggregate(const MatchMatrix& matrix, const ImportanceWeights& weights);

/// Permutation of 1..candidate_count: scored candidates by descending
/// score (ties by index), then unscored ones by index.
std::vector<int> rank_candidates(const ScoreVector& scores, int candidate_count);
std::vector<int> rank_candidates(const ScoreVector& scores, const RerankTask& task);

double reward(const ParseResult<int>& pick, int target_index);

enum class RecallMode { AnyPlay, Discovery };

/// Fraction of outcomes (discovery mode: only discovery-flagged targets)
/// whose reward is exactly 1. Throws EmptyEvalSet when nothing is selected.
double recall_at_1(std::span<const StrategyOutcome> outcomes, RecallMode mode);

/// 100 * (metric - baseline) / baseline rounded to two decimals.
double relative_performance(double metric, double baseline_metric);

struct StrategyMetrics {
  std::size_t n_tasks = 0;
  std::size_t n_discovery_tasks = 0;
  double anyplay_recall1 = 0.0;
  std::optional<double> discovery_recall1;
  double parse_failure_rate = 0.0;
};

struct RelativeTo {
  std::string baseline;
  double anyplay_pct = 0.0;
  std::optional<double> discovery_pct;
};

struct EvalReport {
  std::string strategy;
  StrategyMetrics overall;
  std::map<std::string, StrategyMetrics> per_strategy;
  std::optional<RelativeTo> relative_to;
};

EvalReport evaluate(std::span<const StrategyOutcome> outcomes);

/// Fills `relative_to` against a baseline report. Discovery is left unset
/// when either side has no discovery tasks.
void attach_baseline(EvalReport& report, const EvalReport& baseline);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);

}  // namespace coldrec
