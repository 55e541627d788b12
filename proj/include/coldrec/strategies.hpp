#pragma once

#include <map>
#include <string>
#include <vector>

#include "coldrec/catalog.hpp"
#include "coldrec/gateway.hpp"
#include "coldrec/outcome.hpp"
#include "coldrec/taskgen.hpp"

namespace coldrec {

/// Prompt templates keyed by file stem (`direct_rec`, `ssc_sample`, ...).
/// Templates use `{{history}}`, `{{candidates}}` and `{{paths}}`.
class TemplateSet {
 public:
  TemplateSet() = default;
  explicit TemplateSet(std::map<std::string, std::string> templates) : templates_(std::move(templates)) {}

  /// Reads every known template file present in `dir`; absent files only
  /// fail when a strategy needs them.
  static TemplateSet load(const std::string& dir);

  /// Throws MissingTemplate.
  const std::string& get(const std::string& name, StrategyKind for_strategy) const;
  bool has(const std::string& name) const { return templates_.contains(name); }

  /// Content hash over the templates a strategy uses.
  std::string version(StrategyKind kind) const;

 private:
  std::map<std::string, std::string> templates_;
};

std::vector<std::string> template_names(StrategyKind kind);

struct StrategyConfig {
  std::string model = "default";
  std::size_t max_history_len = 50;
  std::size_t ssc_k = 5;
  double temperature = 0.0;
  double ssc_sample_temperature = 0.8;
  double ssc_summary_temperature = 0.0;
  int max_tokens = 2048;
  /// Prompt size estimate (bytes / 4) plus max_tokens must fit here.
  std::size_t context_budget_tokens = 32768;

  std::size_t history_len(StrategyKind kind) const {
    return kind == StrategyKind::FastReason ? 2 * max_history_len : max_history_len;
  }
};

struct PlannedCall {
  ChatRequest request;
  /// The self-consistency summary call still holds `{{paths}}` until the
  /// sampled paths are available.
  bool awaits_paths = false;
};

struct PromptBundle {
  StrategyKind strategy;
  std::vector<PlannedCall> calls;
  std::string rendered_context;
  std::string template_version;
};

/// Replaces `{{name}}` placeholders. Any placeholder not in `values` and
/// not listed in `deferred` throws UnknownPlaceholder.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& values,
                            const std::vector<std::string>& deferred = {});

std::string render_history(const RerankTask& task, const Catalog& catalog, std::size_t max_len);
std::string render_candidates(const RerankTask& task, const Catalog& catalog);
std::string render_paths(const std::vector<std::string>& path_texts);

std::string request_tag(const RerankTask& task, StrategyKind kind, std::size_t ordinal);
std::string ssc_sample_tag(const std::string& task_id, std::size_t ordinal);
std::string ssc_summary_tag(const std::string& task_id);

PromptBundle build_prompt(const RerankTask& task, StrategyKind strategy, const TemplateSet& templates,
                          const StrategyConfig& config, const Catalog& catalog);

/// Final pick a completion earns under a strategy's parsing rules:
/// Structural traces are re-aggregated and the harness top-1 wins,
/// everything else uses the last FINAL_ANSWER line.
ParseResult<int> evaluate_completion(StrategyKind strategy, std::string_view text, int candidate_count = 50);

StrategyOutcome run_strategy(const RerankTask& task, StrategyKind strategy, Gateway& gateway,
                             const TemplateSet& templates, const StrategyConfig& config, const Catalog& catalog);

/// Runs every task on `workers` threads; outcomes come back ordered by
/// task_id. The first gateway error aborts the batch and is rethrown.
std::vector<StrategyOutcome> run_batch(const std::vector<RerankTask>& tasks, StrategyKind strategy,
                                       Gateway& gateway, const TemplateSet& templates,
                                       const StrategyConfig& config, const Catalog& catalog, std::size_t workers);

}  // namespace coldrec
