#include "coldrec/curation.hpp"

#include <map>

#include <json.hpp>

#include "coldrec/error.hpp"
#include "coldrec/scoring.hpp"
#include "coldrec/util.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

namespace {

std::string dump_line(const ojson& j) { return j.dump(-1, ' ', false, ojson::error_handler_t::replace) + "\n"; }

const std::string& policy_prompt(const StrategyOutcome& o) {
  if (o.prompts.empty()) {
    throw Error(ErrorCode::ConfigError, "outcome " + o.task_id + " carries no rendered prompt");
  }
  return o.prompts.front();
}

template <typename F>
void for_each_json_line(std::string_view text, F&& fn) {
  for (const auto& line : split(text, '\n')) {
    if (trim(line).empty()) continue;
    try {
      fn(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRow, e.what());
    }
  }
}

}  // namespace

std::string sft_completion(const StrategyOutcome& o) {
  if (o.raw_texts.empty()) throw Error(ErrorCode::ConfigError, "outcome " + o.task_id + " has no model output");
  if (o.strategy == StrategyKind::Structural) {
    if (const auto* trace = std::get_if<ParsedTrace>(&o.trace); trace && o.harness_ranking) {
      ParsedTrace canonical = *trace;
      std::get<StructuralTrace>(canonical.body).llm_ranking = *o.harness_ranking;
      canonical.final_pick = o.harness_ranking->front();
      return serialize_trace(canonical);
    }
  }
  if (o.strategy == StrategyKind::SoftSelfConsistency) {
    if (const auto* trace = std::get_if<ParsedTrace>(&o.trace)) return serialize_trace(*trace);
  }
  return o.raw_texts.front();
}

std::vector<SftExample> collect_sft(std::span<const StrategyOutcome> outcomes) {
  std::vector<StrategyKind> order;
  std::map<StrategyKind, std::vector<SftExample>> groups;
  for (const auto& o : outcomes) {
    if (o.reward != kRewardCorrect) continue;
    if (!groups.contains(o.strategy)) order.push_back(o.strategy);
    groups[o.strategy].push_back({policy_prompt(o), sft_completion(o), o.strategy, o.task_id});
  }

  std::vector<SftExample> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto kind : order) {
      auto& g = groups[kind];
      if (round < g.size()) {
        out.push_back(std::move(g[round]));
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

std::vector<GrpoPrompt> build_grpo_prompts(std::span<const StrategyOutcome> outcomes, int oversample_factor,
                                           std::uint64_t seed) {
  if (oversample_factor < 1) throw Error(ErrorCode::ConfigError, "oversample_factor must be >= 1");
  std::vector<GrpoPrompt> out;
  for (const auto& o : outcomes) {
    const int copies = o.reward == kRewardCorrect ? oversample_factor : 1;
    for (int r = 1; r <= copies; ++r) out.push_back({policy_prompt(o), o.task_id, o.strategy, r});
  }
  DeterministicRng rng(seed);
  rng.shuffle(out);
  return out;
}

std::string to_jsonl(std::span<const SftExample> records) {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["prompt"] = r.prompt;
    j["completion"] = r.completion;
    j["strategy"] = to_string(r.strategy);
    j["task_id"] = r.task_id;
    out += dump_line(j);
  }
  return out;
}

std::string to_jsonl(std::span<const GrpoPrompt> records) {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["prompt"] = r.prompt;
    j["task_id"] = r.task_id;
    j["strategy"] = to_string(r.strategy);
    j["replicate"] = r.replicate;
    out += dump_line(j);
  }
  return out;
}

std::vector<SftExample> sft_from_jsonl(std::string_view text) {
  std::vector<SftExample> out;
  for_each_json_line(text, [&](const ojson& j) {
    out.push_back({j.at("prompt").get<std::string>(), j.at("completion").get<std::string>(),
                   parse_strategy(j.at("strategy").get<std::string>()), j.at("task_id").get<std::string>()});
  });
  return out;
}

std::vector<GrpoPrompt> grpo_from_jsonl(std::string_view text) {
  std::vector<GrpoPrompt> out;
  for_each_json_line(text, [&](const ojson& j) {
    out.push_back({j.at("prompt").get<std::string>(), j.at("task_id").get<std::string>(),
                   parse_strategy(j.at("strategy").get<std::string>()), j.at("replicate").get<int>()});
  });
  return out;
}

void export_jsonl(std::span<const SftExample> records, const std::string& path) { write_file(path, to_jsonl(records)); }

void export_jsonl(std::span<const GrpoPrompt> records, const std::string& path) { write_file(path, to_jsonl(records)); }

}  // namespace coldrec
