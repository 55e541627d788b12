#include "coldrec/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "coldrec/error.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

NormalizedWeights normalize_weights(const ImportanceWeights& raw) {
  NormalizedWeights out;
  double total = 0.0;
  for (double w : raw.raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::NegativeWeight, std::to_string(w));
    total += w;
  }
  const auto n = raw.raw.size();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "no weights");
  if (total == 0.0) {
    out.values.assign(n, 1.0 / static_cast<double>(n));
    out.degenerate = true;
    return out;
  }
  out.values.reserve(n);
  for (double w : raw.raw) out.values.push_back(w / total);
  return out;
}

ScoreVector aggregate(const MatchMatrix& matrix, const ImportanceWeights& weights) {
  const auto paths = matrix.path_count();
  if (paths == 0 || weights.raw.size() != paths) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(paths) + " paths vs " +
                                                  std::to_string(weights.raw.size()) + " weights");
  }
  for (const auto& row : matrix.scores) {
    if (row.size() != matrix.candidate_count()) {
      throw Error(ErrorCode::DimensionMismatch, "ragged match matrix");
    }
  }
  const auto w = normalize_weights(weights);
  ScoreVector out;
  for (std::size_t c = 0; c < matrix.candidate_count(); ++c) {
    double sum = 0.0;
    for (std::size_t p = 0; p < paths; ++p) sum += w.values[p] * matrix.scores[p][c];
    out.overall[matrix.candidate_indices[c]] = sum;
  }
  return out;
}

std::vector<int> rank_candidates(const ScoreVector& scores, int candidate_count) {
  std::vector<int> order(static_cast<std::size_t>(candidate_count));
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    auto ia = scores.overall.find(a);
    auto ib = scores.overall.find(b);
    const bool sa = ia != scores.overall.end();
    const bool sb = ib != scores.overall.end();
    if (sa != sb) return sa;
    if (!sa) return false;
    return ia->second > ib->second;
  });
  return order;
}

std::vector<int> rank_candidates(const ScoreVector& scores, const RerankTask& task) {
  return rank_candidates(scores, static_cast<int>(task.candidates.size()));
}

double reward(const ParseResult<int>& pick, int target_index) {
  if (std::holds_alternative<ParseFailure>(pick)) return kRewardParseFailure;
  return std::get<int>(pick) == target_index ? kRewardCorrect : kRewardIncorrect;
}

double recall_at_1(std::span<const StrategyOutcome> outcomes, RecallMode mode) {
  std::size_t selected = 0;
  std::size_t hits = 0;
  for (const auto& o : outcomes) {
    if (mode == RecallMode::Discovery && !o.target_discovery) continue;
    ++selected;
    if (o.reward == kRewardCorrect) ++hits;
  }
  if (selected == 0) {
    throw Error(ErrorCode::EmptyEvalSet, mode == RecallMode::Discovery ? "no discovery targets" : "no outcomes");
  }
  return static_cast<double>(hits) / static_cast<double>(selected);
}

double relative_performance(double metric, double baseline_metric) {
  if (!(baseline_metric > 0.0)) throw Error(ErrorCode::ZeroBaseline, std::to_string(baseline_metric));
  const double pct = 100.0 * (metric - baseline_metric) / baseline_metric;
  const double rounded = std::round(pct * 100.0) / 100.0;
  return rounded == 0.0 ? 0.0 : rounded;  // no "-0.00"
}

namespace {

StrategyMetrics metrics_of(std::span<const StrategyOutcome> outcomes) {
  StrategyMetrics m;
  m.n_tasks = outcomes.size();
  std::size_t failures = 0;
  for (const auto& o : outcomes) {
    if (o.target_discovery) ++m.n_discovery_tasks;
    if (o.parse_failed()) ++failures;
  }
  m.anyplay_recall1 = recall_at_1(outcomes, RecallMode::AnyPlay);
  if (m.n_discovery_tasks > 0) m.discovery_recall1 = recall_at_1(outcomes, RecallMode::Discovery);
  m.parse_failure_rate = static_cast<double>(failures) / static_cast<double>(m.n_tasks);
  return m;
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(); }

std::optional<double> read_optional(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

EvalReport evaluate(std::span<const StrategyOutcome> outcomes) {
  EvalReport report;
  report.overall = metrics_of(outcomes);
  std::map<std::string, std::vector<StrategyOutcome>> groups;
  for (const auto& o : outcomes) groups[std::string(to_string(o.strategy))].push_back(o);
  for (const auto& [name, group] : groups) report.per_strategy[name] = metrics_of(group);
  report.strategy = groups.size() == 1 ? groups.begin()->first : "mixed";
  return report;
}

void attach_baseline(EvalReport& report, const EvalReport& baseline) {
  RelativeTo rel;
  rel.baseline = baseline.strategy;
  rel.anyplay_pct = relative_performance(report.overall.anyplay_recall1, baseline.overall.anyplay_recall1);
  if (report.overall.discovery_recall1 && baseline.overall.discovery_recall1 &&
      *baseline.overall.discovery_recall1 > 0.0) {
    rel.discovery_pct =
        relative_performance(*report.overall.discovery_recall1, *baseline.overall.discovery_recall1);
  }
  report.relative_to = rel;
}

std::string report_to_json(const EvalReport& report) {
  ojson j;
  j["strategy"] = report.strategy;
  j["n_tasks"] = report.overall.n_tasks;
  j["anyplay_recall1"] = report.overall.anyplay_recall1;
  j["discovery_recall1"] = optional_number(report.overall.discovery_recall1);
  j["parse_failure_rate"] = report.overall.parse_failure_rate;
  if (report.relative_to) {
    j["relative_to"] = {{"baseline", report.relative_to->baseline},
                        {"anyplay_pct", report.relative_to->anyplay_pct},
                        {"discovery_pct", optional_number(report.relative_to->discovery_pct)}};
  } else {
    j["relative_to"] = nullptr;
  }
  j["n_discovery_tasks"] = report.overall.n_discovery_tasks;
  j["per_strategy"] = ojson::object();
  for (const auto& [name, m] : report.per_strategy) {
    j["per_strategy"][name] = {{"n_tasks", m.n_tasks},
                               {"anyplay_recall1", m.anyplay_recall1},
                               {"discovery_recall1", optional_number(m.discovery_recall1)},
                               {"n_discovery_tasks", m.n_discovery_tasks},
                               {"parse_failure_rate", m.parse_failure_rate}};
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    EvalReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.overall.n_tasks = j.at("n_tasks").get<std::size_t>();
    r.overall.anyplay_recall1 = j.at("anyplay_recall1").get<double>();
    r.overall.discovery_recall1 = read_optional(j, "discovery_recall1");
    r.overall.parse_failure_rate = j.at("parse_failure_rate").get<double>();
    r.overall.n_discovery_tasks = j.value("n_discovery_tasks", std::size_t{0});
    if (j.contains("relative_to") && !j.at("relative_to").is_null()) {
      const auto& rel = j.at("relative_to");
      r.relative_to = RelativeTo{rel.at("baseline").get<std::string>(), rel.at("anyplay_pct").get<double>(),
                                 read_optional(rel, "discovery_pct")};
    }
    if (j.contains("per_strategy")) {
      for (const auto& [name, m] : j.at("per_strategy").items()) {
        StrategyMetrics sm;
        sm.n_tasks = m.at("n_tasks").get<std::size_t>();
        sm.anyplay_recall1 = m.at("anyplay_recall1").get<double>();
        sm.discovery_recall1 = read_optional(m, "discovery_recall1");
        sm.n_discovery_tasks = m.value("n_discovery_tasks", std::size_t{0});
        sm.parse_failure_rate = m.at("parse_failure_rate").get<double>();
        r.per_strategy[name] = sm;
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("report: ") + e.what());
  }
}

}  // namespace coldrec
