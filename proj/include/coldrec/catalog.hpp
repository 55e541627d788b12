#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coldrec/util.hpp"

namespace coldrec {

struct Item {
  std::string item_id;
  std::string title;
  Date launch_date;
  std::vector<std::string> genres;
  std::vector<std::string> cast;
  std::vector<std::string> directors;

  bool operator==(const Item&) const = default;
};

class Catalog {
 public:
  /// Throws DuplicateItemId when the id is already present.
  void add(Item item);

  const Item& at(std::string_view item_id) const;
  const Item* find(std::string_view item_id) const;
  bool contains(std::string_view item_id) const { return find(item_id) != nullptr; }
  std::size_t size() const { return items_.size(); }
  const std::map<std::string, Item, std::less<>>& items() const { return items_; }

 private:
  std::map<std::string, Item, std::less<>> items_;
};

struct Interaction {
  std::string user_id;
  std::string item_id;
  Timestamp timestamp;
  bool discovery = false;

  bool operator==(const Interaction&) const = default;
};

/// Interactions grouped per user, each list ascending by timestamp with
/// file order kept for equal timestamps.
struct InteractionLog {
  std::map<std::string, std::vector<Interaction>> by_user;
  std::size_t total = 0;
};

enum class TaskMode { Cold, Warm };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct SplitTarget {
  std::string item_id;
  bool discovery = false;
  Timestamp timestamp;

  bool operator==(const SplitTarget&) const = default;
};

struct ColdStartSplit {
  Date cutoff_date;
  std::set<std::string> warm_items;
  std::set<std::string> cold_items;
  /// Warm interactions strictly before the user's final interaction.
  std::map<std::string, std::vector<Interaction>> per_user_history;
  /// Users whose final interaction is a cold item.
  std::map<std::string, SplitTarget> cold_targets;
  /// Users whose final interaction is a warm item.
  std::map<std::string, SplitTarget> warm_targets;
  /// Non-final interactions with cold items, scrubbed from histories.
  std::size_t dropped_cold_interactions = 0;
  /// Warm interactions sharing the final interaction's timestamp.
  std::size_t dropped_tied_interactions = 0;

  const std::map<std::string, SplitTarget>& targets(TaskMode mode) const {
    return mode == TaskMode::Cold ? cold_targets : warm_targets;
  }
  const std::vector<Interaction>& history(const std::string& user_id) const;

  bool operator==(const ColdStartSplit&) const = default;
};

/// Header `item_id,title,launch_date,genres,cast,directors`; list columns
/// are pipe separated.
Catalog load_catalog(const std::string& path);
Catalog parse_catalog(std::string_view csv_text);

/// Header `user_id,item_id,timestamp,discovery`.
InteractionLog load_interactions(const std::string& path, const Catalog& catalog);
InteractionLog parse_interactions(std::string_view csv_text, const Catalog& catalog);

ColdStartSplit split_cold_start(const Catalog& catalog, const InteractionLog& log, Date cutoff_date);

}  // namespace coldrec
