#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "coldrec/catalog.hpp"

namespace coldrec {

inline constexpr int kCandidateCount = 50;
inline constexpr int kWarmSlots = 40;
inline constexpr int kColdSlots = 10;

struct HistoryEvent {
  std::string item_id;
  Timestamp timestamp;
  bool discovery = false;

  bool operator==(const HistoryEvent&) const = default;
};

/// A candidate as presented to the model: `index` is the alias the model
/// answers with.
struct CandidateSlot {
  int index = 0;
  std::string item_id;
  std::string title;
  Date launch_date;
  std::vector<std::string> genres;

  bool operator==(const CandidateSlot&) const = default;
};

struct RerankTask {
  std::string task_id;
  std::string user_id;
  TaskMode mode = TaskMode::Cold;
  std::uint64_t seed = 0;
  std::vector<HistoryEvent> history;
  std::vector<CandidateSlot> candidates;
  int target_index = 0;
  bool target_discovery = false;

  const CandidateSlot& target() const { return candidates.at(static_cast<std::size_t>(target_index - 1)); }
  bool operator==(const RerankTask&) const = default;
};

struct TaskConfig {
  /// Base history length; Fast-Reason prompts use twice this.
  std::size_t max_history_len = 50;

  /// Tasks keep enough history for the longest-context strategy; prompts
  /// truncate further.
  std::size_t stored_history_len() const { return 2 * max_history_len; }
};

struct ScoredItem {
  std::string item_id;
  double score = 0.0;
};

/// Source of per-user warm-item scores standing in for a production ranker.
class WarmRanker {
 public:
  virtual ~WarmRanker() = default;
  virtual std::vector<ScoredItem> scores(const std::string& user_id, const ColdStartSplit& split) const = 0;
};

/// Global play counts over the split's histories; every warm item is
/// scored, unplayed ones with 0.
class PopularityRanker final : public WarmRanker {
 public:
  explicit PopularityRanker(const ColdStartSplit& split);
  std::vector<ScoredItem> scores(const std::string& user_id, const ColdStartSplit& split) const override;

 private:
  std::vector<ScoredItem> counts_;
};

/// Precomputed per-user scores from `baseline_scores.csv`
/// (`user_id,item_id,score`).
class FileRanker final : public WarmRanker {
 public:
  static FileRanker load(const std::string& path, const Catalog& catalog);
  static FileRanker parse(std::string_view csv_text, const Catalog& catalog);
  std::vector<ScoredItem> scores(const std::string& user_id, const ColdStartSplit& split) const override;

 private:
  std::map<std::string, std::vector<ScoredItem>> per_user_;
};

/// Warm items not in the user's history, score descending, ties by id.
/// Throws InsufficientWarmCandidates when fewer than 40 remain.
std::vector<std::string> rank_warm_candidates(const std::string& user_id, const ColdStartSplit& split,
                                              const Catalog& catalog, const WarmRanker& ranker);

std::vector<HistoryEvent> truncate_history(const std::vector<HistoryEvent>& history, std::size_t max_len);

std::string make_task_id(TaskMode mode, std::string_view user_id);

RerankTask assemble_task(const std::string& user_id, TaskMode mode, const ColdStartSplit& split,
                         const Catalog& catalog, const WarmRanker& ranker, const TaskConfig& config,
                         std::uint64_t seed);

/// One task per user in the mode's target set, ordered by user id, each
/// seeded with derive_seed(global_seed, user_id).
std::vector<RerankTask> build_tasks(TaskMode mode, const ColdStartSplit& split, const Catalog& catalog,
                                    const WarmRanker& ranker, const TaskConfig& config,
                                    std::uint64_t global_seed);

std::string task_to_json(const RerankTask& task);
RerankTask task_from_json(std::string_view line);
void save_tasks(const std::string& path, const std::vector<RerankTask>& tasks);
std::vector<RerankTask> load_tasks(const std::string& path);

}  // namespace coldrec
