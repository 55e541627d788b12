#include "coldrec/outcome.hpp"

#include <cctype>

#include "coldrec/error.hpp"
#include "coldrec/util.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::DirectRec: return "direct_rec";
    case StrategyKind::BaseReason: return "base_reason";
    case StrategyKind::FastReason: return "fast_reason";
    case StrategyKind::Structural: return "structural";
    case StrategyKind::SoftSelfConsistency: return "soft_self_consistency";
  }
  return "unknown";
}

StrategyKind parse_strategy(std::string_view text) {
  std::string lowered;
  for (char c : text) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lowered == "ssc") return StrategyKind::SoftSelfConsistency;
  for (auto kind : kAllStrategies) {
    if (to_string(kind) == lowered) return kind;
  }
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + std::string(text) + "'");
}

std::string outcome_to_json(const StrategyOutcome& o) {
  ojson j;
  j["task_id"] = o.task_id;
  j["strategy"] = to_string(o.strategy);
  j["template_version"] = o.template_version;
  j["raw_texts"] = o.raw_texts;
  j["trace"] = trace_to_json(o.trace);
  if (const auto* pick = std::get_if<int>(&o.final_pick)) {
    j["final_pick"] = *pick;
  } else {
    const auto& f = std::get<ParseFailure>(o.final_pick);
    j["final_pick"] = {{"failure", to_string(f.reason)}, {"offset", f.offset}};
  }
  j["reward"] = o.reward;
  j["harness_ranking"] = o.harness_ranking ? ojson(*o.harness_ranking) : ojson();
  j["ranking_disagrees"] = o.ranking_disagrees;
  j["target_index"] = o.target_index;
  j["target_discovery"] = o.target_discovery ? 1 : 0;
  return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

StrategyOutcome outcome_from_json(std::string_view line) {
  try {
    const auto j = ojson::parse(line);
    StrategyOutcome o;
    o.task_id = j.at("task_id").get<std::string>();
    o.strategy = parse_strategy(j.at("strategy").get<std::string>());
    o.template_version = j.at("template_version").get<std::string>();
    o.raw_texts = j.at("raw_texts").get<std::vector<std::string>>();
    o.trace = trace_from_json(j.at("trace"));
    const auto& pick = j.at("final_pick");
    if (pick.is_number_integer()) {
      o.final_pick = pick.get<int>();
    } else {
      o.final_pick = ParseFailure{parse_failure_reason(pick.at("failure").get<std::string>()),
                                  pick.at("offset").get<std::size_t>()};
    }
    o.reward = j.at("reward").get<double>();
    if (!j.at("harness_ranking").is_null()) o.harness_ranking = j.at("harness_ranking").get<std::vector<int>>();
    o.ranking_disagrees = j.value("ranking_disagrees", false);
    o.target_index = j.at("target_index").get<int>();
    o.target_discovery = j.at("target_discovery").get<int>() == 1;
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("outcome record: ") + e.what());
  }
}

void save_outcomes(const std::string& path, const std::vector<StrategyOutcome>& outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    out += outcome_to_json(o);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<StrategyOutcome> load_outcomes(const std::string& path) {
  std::vector<StrategyOutcome> out;
  for (const auto& line : split(read_file(path), '\n')) {
    if (!trim(line).empty()) out.push_back(outcome_from_json(line));
  }
  return out;
}

}  // namespace coldrec
