#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coldrec/outcome.hpp"

namespace coldrec {

struct SftExample {
  std::string prompt;
  std::string completion;
  StrategyKind strategy = StrategyKind::DirectRec;
  std::string task_id;

  bool operator==(const SftExample&) const = default;
};

struct GrpoPrompt {
  std::string prompt;
  std::string task_id;
  StrategyKind strategy = StrategyKind::DirectRec;
  int replicate = 1;

  bool operator==(const GrpoPrompt&) const = default;
};

/// Training completion for a successful outcome. Single-call strategies
/// use the raw model text; Structural traces are re-serialized with the
/// harness ranking and pick; self-consistency runs become one text holding
/// every sampled path, the summary and the final answer.
std::string sft_completion(const StrategyOutcome& outcome);

/// Successful outcomes only (reward == 1), strategies interleaved
/// round-robin in order of first appearance. Outcomes must carry prompts.
std::vector<SftExample> collect_sft(std::span<const StrategyOutcome> outcomes);

/// Each outcome contributes its prompt once; successful ones contribute
/// `oversample_factor` replicas. The result is shuffled with `seed`.
std::vector<GrpoPrompt> build_grpo_prompts(std::span<const StrategyOutcome> outcomes, int oversample_factor,
                                           std::uint64_t seed);

std::string to_jsonl(std::span<const SftExample> records);
std::string to_jsonl(std::span<const GrpoPrompt> records);
std::vector<SftExample> sft_from_jsonl(std::string_view text);
std::vector<GrpoPrompt> grpo_from_jsonl(std::string_view text);

void export_jsonl(std::span<const SftExample> records, const std::string& path);
void export_jsonl(std::span<const GrpoPrompt> records, const std::string& path);

}  // namespace coldrec
