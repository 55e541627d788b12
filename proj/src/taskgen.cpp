#include "coldrec/taskgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "coldrec/error.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

PopularityRanker::PopularityRanker(const ColdStartSplit& split) {
  std::unordered_map<std::string, double> counts;
  for (const auto& id : split.warm_items) counts[id] = 0.0;
  for (const auto& [user, events] : split.per_user_history) {
    for (const auto& ev : events) counts[ev.item_id] += 1.0;
  }
  for (const auto& id : split.warm_items) counts_.push_back({id, counts[id]});
}

std::vector<ScoredItem> PopularityRanker::scores(const std::string&, const ColdStartSplit&) const {
  return counts_;
}

FileRanker FileRanker::parse(std::string_view csv_text, const Catalog& catalog) {
  FileRanker ranker;
  std::size_t line_no = 0;
  for (const auto& raw : split(csv_text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line_no == 1) {
      if (line != "user_id,item_id,score") {
        throw MalformedRowError(1, "expected header 'user_id,item_id,score'");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (!fields || fields->size() != 3) throw MalformedRowError(line_no, "expected 3 fields");
    const auto item_id = std::string(trim((*fields)[1]));
    if (!catalog.contains(item_id)) throw Error(ErrorCode::UnknownItemId, item_id);
    const auto score_text = trim((*fields)[2]);
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (ec != std::errc() || ptr != score_text.data() + score_text.size() || !std::isfinite(score)) {
      throw MalformedRowError(line_no, "invalid score '" + std::string(score_text) + "'");
    }
    ranker.per_user_[std::string(trim((*fields)[0]))].push_back({item_id, score});
  }
  if (line_no == 0) throw MalformedRowError(1, "missing header");
  return ranker;
}

FileRanker FileRanker::load(const std::string& path, const Catalog& catalog) {
  return parse(read_file(path), catalog);
}

std::vector<ScoredItem> FileRanker::scores(const std::string& user_id, const ColdStartSplit&) const {
  auto it = per_user_.find(user_id);
  return it == per_user_.end() ? std::vector<ScoredItem>{} : it->second;
}

std::vector<std::string> rank_warm_candidates(const std::string& user_id, const ColdStartSplit& split,
                                              const Catalog& catalog, const WarmRanker& ranker) {
  std::set<std::string> watched;
  for (const auto& ev : split.history(user_id)) watched.insert(ev.item_id);

  std::vector<ScoredItem> pool;
  std::set<std::string> seen;
  for (auto& s : ranker.scores(user_id, split)) {
    if (!catalog.contains(s.item_id)) throw Error(ErrorCode::UnknownItemId, s.item_id);
    if (!split.warm_items.contains(s.item_id) || watched.contains(s.item_id)) continue;
    if (!seen.insert(s.item_id).second) continue;  // first score for an item wins
    pool.push_back(std::move(s));
  }
  if (pool.size() < static_cast<std::size_t>(kWarmSlots)) {
    throw CountError(ErrorCode::InsufficientWarmCandidates, pool.size(),
                     "user " + user_id + " needs " + std::to_string(kWarmSlots) + " warm candidates");
  }
  std::sort(pool.begin(), pool.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  std::vector<std::string> out;
  out.reserve(pool.size());
  for (auto& s : pool) out.push_back(std::move(s.item_id));
  return out;
}

std::vector<HistoryEvent> truncate_history(const std::vector<HistoryEvent>& history, std::size_t max_len) {
  if (history.size() <= max_len) return history;
  return {history.end() - static_cast<std::ptrdiff_t>(max_len), history.end()};
}

std::string make_task_id(TaskMode mode, std::string_view user_id) {
  return std::string(to_string(mode)) + "_" + std::string(user_id);
}

RerankTask assemble_task(const std::string& user_id, TaskMode mode, const ColdStartSplit& split,
                         const Catalog& catalog, const WarmRanker& ranker, const TaskConfig& config,
                         std::uint64_t seed) {
  const auto& targets = split.targets(mode);
  auto target_it = targets.find(user_id);
  if (target_it == targets.end()) {
    throw Error(ErrorCode::UserNotInMode, "user " + user_id + " has no " + std::string(to_string(mode)) + " target");
  }
  const SplitTarget& target = target_it->second;

  auto ranked = rank_warm_candidates(user_id, split, catalog, ranker);
  std::vector<std::string> warm(ranked.begin(), ranked.begin() + kWarmSlots);

  std::vector<std::string> cold_pool;
  for (const auto& id : split.cold_items) {
    if (id != target.item_id) cold_pool.push_back(id);
  }
  const std::size_t cold_needed = mode == TaskMode::Cold ? kColdSlots - 1 : kColdSlots;
  if (cold_pool.size() < cold_needed) {
    throw CountError(ErrorCode::InsufficientColdCandidates, cold_pool.size(),
                     "need " + std::to_string(cold_needed) + " cold items besides the target");
  }

  if (mode == TaskMode::Warm && std::find(warm.begin(), warm.end(), target.item_id) == warm.end()) {
    warm.back() = target.item_id;
  }

  DeterministicRng rng(seed);
  auto ids = std::move(warm);
  for (auto& id : rng.sample(std::move(cold_pool), cold_needed)) ids.push_back(std::move(id));
  if (mode == TaskMode::Cold) ids.push_back(target.item_id);
  rng.shuffle(ids);

  RerankTask task;
  task.task_id = make_task_id(mode, user_id);
  task.user_id = user_id;
  task.mode = mode;
  task.seed = seed;
  task.target_discovery = target.discovery;

  std::vector<HistoryEvent> full;
  for (const auto& ev : split.history(user_id)) full.push_back({ev.item_id, ev.timestamp, ev.discovery});
  task.history = truncate_history(full, config.stored_history_len());

  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Item& item = catalog.at(ids[i]);
    const int index = static_cast<int>(i) + 1;
    task.candidates.push_back({index, item.item_id, item.title, item.launch_date, item.genres});
    if (item.item_id == target.item_id) task.target_index = index;
  }
  return task;
}

std::vector<RerankTask> build_tasks(TaskMode mode, const ColdStartSplit& split, const Catalog& catalog,
                                    const WarmRanker& ranker, const TaskConfig& config,
                                    std::uint64_t global_seed) {
  std::vector<RerankTask> tasks;
  for (const auto& [user, target] : split.targets(mode)) {
    tasks.push_back(assemble_task(user, mode, split, catalog, ranker, config, derive_seed(global_seed, user)));
  }
  return tasks;
}

std::string task_to_json(const RerankTask& task) {
  ojson j;
  j["task_id"] = task.task_id;
  j["user_id"] = task.user_id;
  j["mode"] = to_string(task.mode);
  j["seed"] = task.seed;
  j["history"] = ojson::array();
  for (const auto& ev : task.history) {
    j["history"].push_back(
        {{"item_id", ev.item_id}, {"timestamp", format_timestamp(ev.timestamp)}, {"discovery", ev.discovery ? 1 : 0}});
  }
  j["candidates"] = ojson::array();
  for (const auto& c : task.candidates) {
    ojson slot;
    slot["index"] = c.index;
    slot["item_id"] = c.item_id;
    slot["title"] = c.title;
    slot["launch_date"] = format_date(c.launch_date);
    slot["genres"] = c.genres;
    j["candidates"].push_back(std::move(slot));
  }
  j["target_index"] = task.target_index;
  j["target_discovery"] = task.target_discovery ? 1 : 0;
  return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

RerankTask task_from_json(std::string_view line) {
  try {
    const auto j = ojson::parse(line);
    RerankTask task;
    task.task_id = j.at("task_id").get<std::string>();
    task.user_id = j.at("user_id").get<std::string>();
    task.mode = parse_task_mode(j.at("mode").get<std::string>());
    task.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ev : j.at("history")) {
      auto ts = parse_timestamp(ev.at("timestamp").get<std::string>());
      if (!ts) throw Error(ErrorCode::MalformedRow, "bad history timestamp in task " + task.task_id);
      task.history.push_back({ev.at("item_id").get<std::string>(), *ts, ev.at("discovery").get<int>() == 1});
    }
    for (const auto& c : j.at("candidates")) {
      auto date = parse_date(c.at("launch_date").get<std::string>());
      if (!date) throw Error(ErrorCode::MalformedRow, "bad launch_date in task " + task.task_id);
      task.candidates.push_back({c.at("index").get<int>(), c.at("item_id").get<std::string>(),
                                 c.at("title").get<std::string>(), *date,
                                 c.at("genres").get<std::vector<std::string>>()});
    }
    task.target_index = j.at("target_index").get<int>();
    task.target_discovery = j.value("target_discovery", 0) == 1;
    if (task.target_index < 1 || task.target_index > static_cast<int>(task.candidates.size())) {
      throw Error(ErrorCode::MalformedRow, "target_index out of range in task " + task.task_id);
    }
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("task record: ") + e.what());
  }
}

void save_tasks(const std::string& path, const std::vector<RerankTask>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    out += task_to_json(t);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<RerankTask> load_tasks(const std::string& path) {
  std::vector<RerankTask> tasks;
  for (const auto& line : split(read_file(path), '\n')) {
    if (trim(line).empty()) continue;
    tasks.push_back(task_from_json(line));
  }
  return tasks;
}

}  // namespace coldrec
