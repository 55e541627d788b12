#include "coldrec/catalog.hpp"

#include <algorithm>
#include <filesystem>

#include "coldrec/error.hpp"

namespace coldrec {

namespace {

constexpr std::string_view kCatalogHeader = "item_id,title,launch_date,genres,cast,directors";
constexpr std::string_view kInteractionsHeader = "user_id,item_id,timestamp,discovery";

std::vector<std::string> parse_list(std::string_view field) {
  std::vector<std::string> out;
  if (trim(field).empty()) return out;
  for (auto& part : split(field, '|')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// Calls `on_row(fields, line_no)` for every non-blank data row.
template <typename F>
void for_each_row(std::string_view text, std::string_view header, std::size_t columns, F&& on_row) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? end : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!saw_header) {
      if (trim(line) != header) {
        throw MalformedRowError(line_no, "expected header '" + std::string(header) + "'");
      }
      saw_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = parse_csv_line(line);
    if (!fields) throw MalformedRowError(line_no, "unbalanced quotes");
    if (fields->size() != columns) {
      throw MalformedRowError(line_no, "expected " + std::to_string(columns) + " fields, got " +
                                           std::to_string(fields->size()));
    }
    on_row(*fields, line_no);
  }
  if (!saw_header) throw MalformedRowError(1, "missing header");
}

std::string read_existing(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::MissingFile, path);
  return read_file(path);
}

}  // namespace

void Catalog::add(Item item) {
  if (items_.contains(item.item_id)) throw Error(ErrorCode::DuplicateItemId, item.item_id);
  auto id = item.item_id;
  items_.emplace(std::move(id), std::move(item));
}

const Item& Catalog::at(std::string_view item_id) const {
  const Item* item = find(item_id);
  if (item == nullptr) throw Error(ErrorCode::UnknownItemId, std::string(item_id));
  return *item;
}

const Item* Catalog::find(std::string_view item_id) const {
  auto it = items_.find(item_id);
  return it == items_.end() ? nullptr : &it->second;
}

std::string_view to_string(TaskMode mode) { return mode == TaskMode::Cold ? "cold" : "warm"; }

TaskMode parse_task_mode(std::string_view text) {
  if (text == "cold") return TaskMode::Cold;
  if (text == "warm") return TaskMode::Warm;
  throw Error(ErrorCode::ConfigError, "mode must be cold or warm, got '" + std::string(text) + "'");
}

const std::vector<Interaction>& ColdStartSplit::history(const std::string& user_id) const {
  static const std::vector<Interaction> kEmpty;
  auto it = per_user_history.find(user_id);
  return it == per_user_history.end() ? kEmpty : it->second;
}

Catalog parse_catalog(std::string_view csv_text) {
  Catalog catalog;
  for_each_row(csv_text, kCatalogHeader, 6, [&](std::vector<std::string>& f, std::size_t line) {
    Item item;
    item.item_id = std::string(trim(f[0]));
    if (item.item_id.empty()) throw MalformedRowError(line, "empty item_id");
    item.title = f[1];
    auto date = parse_date(trim(f[2]));
    if (!date) throw MalformedRowError(line, "invalid launch_date '" + f[2] + "'");
    item.launch_date = *date;
    item.genres = parse_list(f[3]);
    item.cast = parse_list(f[4]);
    item.directors = parse_list(f[5]);
    catalog.add(std::move(item));
  });
  return catalog;
}

Catalog load_catalog(const std::string& path) { return parse_catalog(read_existing(path)); }

InteractionLog parse_interactions(std::string_view csv_text, const Catalog& catalog) {
  InteractionLog log;
  for_each_row(csv_text, kInteractionsHeader, 4, [&](std::vector<std::string>& f, std::size_t line) {
    Interaction ev;
    ev.user_id = std::string(trim(f[0]));
    if (ev.user_id.empty()) throw MalformedRowError(line, "empty user_id");
    ev.item_id = std::string(trim(f[1]));
    if (!catalog.contains(ev.item_id)) throw Error(ErrorCode::UnknownItemId, ev.item_id);
    auto ts = parse_timestamp(trim(f[2]));
    if (!ts) throw MalformedRowError(line, "invalid timestamp '" + f[2] + "'");
    ev.timestamp = *ts;
    const auto flag = trim(f[3]);
    if (flag != "0" && flag != "1") throw MalformedRowError(line, "discovery must be 0 or 1");
    ev.discovery = flag == "1";
    log.by_user[ev.user_id].push_back(std::move(ev));
    ++log.total;
  });
  for (auto& [user, events] : log.by_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
  }
  return log;
}

InteractionLog load_interactions(const std::string& path, const Catalog& catalog) {
  return parse_interactions(read_existing(path), catalog);
}

ColdStartSplit split_cold_start(const Catalog& catalog, const InteractionLog& log, Date cutoff_date) {
  if (log.by_user.empty()) throw Error(ErrorCode::EmptyLog, "interaction log has no rows");

  ColdStartSplit split;
  split.cutoff_date = cutoff_date;
  for (const auto& [id, item] : catalog.items()) {
    if (item.launch_date > cutoff_date) {
      split.cold_items.insert(id);
    } else {
      split.warm_items.insert(id);
    }
  }
  if (split.warm_items.empty()) {
    throw Error(ErrorCode::NoWarmItems, "no item launched on or before " + format_date(cutoff_date));
  }

  for (const auto& [user, events] : log.by_user) {
    if (events.empty()) continue;
    const Interaction& last = events.back();
    SplitTarget target{last.item_id, last.discovery, last.timestamp};
    const bool cold_final = split.cold_items.contains(last.item_id);
    (cold_final ? split.cold_targets : split.warm_targets).emplace(user, target);

    auto& history = split.per_user_history[user];
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
      const Interaction& ev = events[i];
      if (split.cold_items.contains(ev.item_id)) {
        ++split.dropped_cold_interactions;
      } else if (ev.timestamp >= last.timestamp) {
        ++split.dropped_tied_interactions;
      } else {
        history.push_back(ev);
      }
    }
  }
  return split;
}

}  // namespace coldrec
