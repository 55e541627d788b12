#include "coldrec/strategies.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <future>
#include <thread>

#include "coldrec/error.hpp"
#include "coldrec/scoring.hpp"

namespace coldrec {

namespace {

constexpr std::size_t kMaxListedCast = 4;

std::string list_or_dash(const std::vector<std::string>& values, std::size_t limit = SIZE_MAX) {
  if (values.empty()) return "-";
  std::vector<std::string> head(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(std::min(limit, values.size())));
  return join(head, ", ");
}

std::string describe_item(const Item& item) {
  std::string out = item.title;
  out += " | genres: " + list_or_dash(item.genres);
  if (!item.cast.empty()) out += " | cast: " + list_or_dash(item.cast, kMaxListedCast);
  if (!item.directors.empty()) out += " | directors: " + list_or_dash(item.directors);
  return out;
}

std::size_t estimate_tokens(const std::string& text) { return (text.size() + 3) / 4; }

void check_budget(const std::string& prompt, const StrategyConfig& config, const std::string& tag) {
  const auto needed = estimate_tokens(prompt) + static_cast<std::size_t>(config.max_tokens);
  if (needed > config.context_budget_tokens) {
    throw Error(ErrorCode::ContextOverflow, tag + " needs ~" + std::to_string(needed) + " tokens, budget " +
                                                std::to_string(config.context_budget_tokens));
  }
}

ChatRequest make_request(const StrategyConfig& config, std::string prompt, double temperature, std::string tag) {
  ChatRequest r;
  r.model = config.model;
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.max_tokens = config.max_tokens;
  r.request_tag = std::move(tag);
  return r;
}

struct StructuralScore {
  int pick;
  std::vector<int> ranking;
};

StructuralScore score_structural(const StructuralTrace& st, int candidate_count) {
  const auto scores = aggregate(st.matrix, st.weights);
  auto ranking = rank_candidates(scores, candidate_count);
  return {ranking.front(), std::move(ranking)};
}

// Drops a trailing FINAL_ANSWER line so the summary can be re-serialized
// with the marker appended exactly once.
std::string strip_trailing_marker(std::string_view text) {
  auto body = text;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ')) body.remove_suffix(1);
  const auto nl = body.rfind('\n');
  const auto last = nl == std::string_view::npos ? body : body.substr(nl + 1);
  if (trim(last).starts_with(kFinalMarker)) {
    body = nl == std::string_view::npos ? std::string_view{} : body.substr(0, nl);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
  }
  return std::string(body);
}

}  // namespace

std::vector<std::string> template_names(StrategyKind kind) {
  if (kind == StrategyKind::SoftSelfConsistency) return {"ssc_sample", "ssc_summarize"};
  return {std::string(to_string(kind))};
}

TemplateSet TemplateSet::load(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, "template directory " + dir);
  std::map<std::string, std::string> templates;
  for (auto kind : kAllStrategies) {
    for (const auto& name : template_names(kind)) {
      const auto path = std::filesystem::path(dir) / (name + ".txt");
      if (std::filesystem::is_regular_file(path)) templates[name] = read_file(path.string());
    }
  }
  return TemplateSet(std::move(templates));
}

const std::string& TemplateSet::get(const std::string& name, StrategyKind for_strategy) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorCode::MissingTemplate, std::string(to_string(for_strategy)) + " needs " + name + ".txt");
  }
  return it->second;
}

std::string TemplateSet::version(StrategyKind kind) const {
  std::uint64_t h = fnv1a64(to_string(kind));
  for (const auto& name : template_names(kind)) {
    h = fnv1a64(name, h);
    h = fnv1a64(get(name, kind), h);
  }
  return hex64(h);
}

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& values,
                            const std::vector<std::string>& deferred) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos);
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) throw Error(ErrorCode::UnknownPlaceholder, "unterminated '{{'");
    out.append(tmpl, pos, open - pos);
    const std::string name(trim(std::string_view(tmpl).substr(open + 2, close - open - 2)));
    if (auto it = values.find(name); it != values.end()) {
      out += it->second;
    } else if (std::find(deferred.begin(), deferred.end(), name) != deferred.end()) {
      out.append(tmpl, open, close + 2 - open);
    } else {
      throw Error(ErrorCode::UnknownPlaceholder, "{{" + name + "}}");
    }
    pos = close + 2;
  }
  return out;
}

std::string render_history(const RerankTask& task, const Catalog& catalog, std::size_t max_len) {
  const auto events = truncate_history(task.history, max_len);
  if (events.empty()) return "(no earlier plays)";
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const auto date = format_timestamp(ev.timestamp).substr(0, 10);
    out += std::to_string(i + 1) + ". [" + date + "] " + describe_item(catalog.at(ev.item_id));
    if (ev.discovery) out += " (discovery)";
    if (i + 1 < events.size()) out += '\n';
  }
  return out;
}

std::string render_candidates(const RerankTask& task, const Catalog& catalog) {
  std::string out;
  for (std::size_t i = 0; i < task.candidates.size(); ++i) {
    const auto& c = task.candidates[i];
    out += "[" + std::to_string(c.index) + "] " + c.title + " | launched " + format_date(c.launch_date) +
           " | genres: " + list_or_dash(c.genres);
    if (const Item* item = catalog.find(c.item_id)) {
      if (!item->cast.empty()) out += " | cast: " + list_or_dash(item->cast, kMaxListedCast);
      if (!item->directors.empty()) out += " | directors: " + list_or_dash(item->directors);
    }
    if (i + 1 < task.candidates.size()) out += '\n';
  }
  return out;
}

std::string render_paths(const std::vector<std::string>& path_texts) {
  std::string out;
  for (std::size_t i = 0; i < path_texts.size(); ++i) {
    out += ssc_path_header(i + 1) + "\n" + std::string(trim(path_texts[i]));
    if (i + 1 < path_texts.size()) out += "\n\n";
  }
  return out;
}

std::string request_tag(const RerankTask& task, StrategyKind kind, std::size_t ordinal) {
  return task.task_id + "/" + std::string(to_string(kind)) + "/" + std::to_string(ordinal);
}

std::string ssc_sample_tag(const std::string& task_id, std::size_t ordinal) {
  return task_id + "/ssc/" + std::to_string(ordinal);
}

std::string ssc_summary_tag(const std::string& task_id) { return task_id + "/ssc/summary"; }

PromptBundle build_prompt(const RerankTask& task, StrategyKind strategy, const TemplateSet& templates,
                          const StrategyConfig& config, const Catalog& catalog) {
  PromptBundle bundle{strategy, {}, {}, templates.version(strategy)};
  const std::map<std::string, std::string> values{
      {"history", render_history(task, catalog, config.history_len(strategy))},
      {"candidates", render_candidates(task, catalog)},
  };
  bundle.rendered_context = values.at("history") + "\n\n" + values.at("candidates");

  if (strategy != StrategyKind::SoftSelfConsistency) {
    auto prompt = render_template(templates.get(template_names(strategy).front(), strategy), values);
    auto tag = request_tag(task, strategy, 1);
    check_budget(prompt, config, tag);
    bundle.calls.push_back({make_request(config, std::move(prompt), config.temperature, std::move(tag)), false});
    return bundle;
  }

  if (config.ssc_k == 0) throw Error(ErrorCode::ConfigError, "ssc_k must be >= 1");
  const auto sample = render_template(templates.get("ssc_sample", strategy), values);
  for (std::size_t i = 1; i <= config.ssc_k; ++i) {
    auto tag = ssc_sample_tag(task.task_id, i);
    check_budget(sample, config, tag);
    bundle.calls.push_back({make_request(config, sample, config.ssc_sample_temperature, std::move(tag)), false});
  }
  auto summary = render_template(templates.get("ssc_summarize", strategy), values, {"paths"});
  auto tag = ssc_summary_tag(task.task_id);
  check_budget(summary, config, tag);
  bundle.calls.push_back({make_request(config, std::move(summary), config.ssc_summary_temperature, std::move(tag)), true});
  return bundle;
}

ParseResult<int> evaluate_completion(StrategyKind strategy, std::string_view text, int candidate_count) {
  if (strategy != StrategyKind::Structural) return parse_final_pick(text);
  auto parsed = parse_structural(text);
  if (auto* f = std::get_if<ParseFailure>(&parsed)) return *f;
  return score_structural(std::get<ParsedTrace>(parsed).structural(), candidate_count).pick;
}

StrategyOutcome run_strategy(const RerankTask& task, StrategyKind strategy, Gateway& gateway,
                             const TemplateSet& templates, const StrategyConfig& config, const Catalog& catalog) {
  auto bundle = build_prompt(task, strategy, templates, config, catalog);

  StrategyOutcome outcome;
  outcome.task_id = task.task_id;
  outcome.strategy = strategy;
  outcome.template_version = bundle.template_version;
  outcome.target_index = task.target_index;
  outcome.target_discovery = task.target_discovery;
  const int candidate_count = static_cast<int>(task.candidates.size());

  if (strategy == StrategyKind::SoftSelfConsistency) {
    std::vector<std::future<ChatResponse>> pending;
    for (const auto& call : bundle.calls) {
      if (call.awaits_paths) continue;
      outcome.prompts.push_back(call.request.messages.back().content);
      pending.push_back(std::async(std::launch::async, [&gateway, &call] { return gateway.complete(call.request); }));
    }
    std::vector<std::string> paths;
    std::exception_ptr failure;
    for (auto& f : pending) {
      try {
        paths.push_back(f.get().content);
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    ChatRequest summary = bundle.calls.back().request;
    // Only the deferred slot is filled here. Re-rendering the whole prompt
    // would treat braces inside already-substituted titles as placeholders.
    auto& content = summary.messages.back().content;
    if (const auto at = content.rfind("{{paths}}"); at != std::string::npos) {
      content.replace(at, std::string_view("{{paths}}").size(), render_paths(paths));
    }
    outcome.prompts.push_back(summary.messages.back().content);
    const auto summary_text = gateway.complete(summary).content;

    outcome.raw_texts = paths;
    outcome.raw_texts.push_back(summary_text);
    outcome.final_pick = parse_final_pick(summary_text);
    ParsedTrace trace{SscTrace{paths, strip_trailing_marker(summary_text)}, std::nullopt};
    if (const int* pick = std::get_if<int>(&outcome.final_pick)) trace.final_pick = *pick;
    outcome.trace = std::move(trace);
  } else {
    const auto& request = bundle.calls.front().request;
    outcome.prompts.push_back(request.messages.back().content);
    const auto text = gateway.complete(request).content;
    outcome.raw_texts.push_back(text);

    if (strategy == StrategyKind::Structural) {
      outcome.trace = parse_structural(text);
      if (const auto* f = std::get_if<ParseFailure>(&outcome.trace)) {
        outcome.final_pick = *f;
      } else {
        const auto& parsed = std::get<ParsedTrace>(outcome.trace);
        auto scored = score_structural(parsed.structural(), candidate_count);
        outcome.final_pick = scored.pick;
        const auto& llm = parsed.structural().llm_ranking;
        outcome.ranking_disagrees = (parsed.final_pick && *parsed.final_pick != scored.pick) ||
                                    (llm && !llm->empty() && llm->front() != scored.pick);
        outcome.harness_ranking = std::move(scored.ranking);
      }
    } else {
      outcome.trace = parse_plain(text);
      outcome.final_pick = parse_final_pick(text);
    }
  }

  outcome.reward = reward(outcome.final_pick, task.target_index);
  return outcome;
}

std::vector<StrategyOutcome> run_batch(const std::vector<RerankTask>& tasks, StrategyKind strategy,
                                       Gateway& gateway, const TemplateSet& templates,
                                       const StrategyConfig& config, const Catalog& catalog, std::size_t workers) {
  std::vector<StrategyOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> aborted{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (!aborted.load()) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        outcomes[i] = run_strategy(tasks[i], strategy, gateway, templates, config, catalog);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        aborted = true;
      }
    }
  };

  const auto n = std::max<std::size_t>(1, std::min(workers, tasks.size()));
  std::vector<std::jthread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const StrategyOutcome& a, const StrategyOutcome& b) { return a.task_id < b.task_id; });
  return outcomes;
}

}  // namespace coldrec
