#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace coldrec {

inline constexpr std::string_view kFinalMarker = "FINAL_ANSWER:";

enum class FailureReason { NoFinalMarker, BadJson, SchemaViolation, IndexOutOfRange, InconsistentDimensions };

std::string_view to_string(FailureReason reason);
FailureReason parse_failure_reason(std::string_view text);

struct ParseFailure {
  FailureReason reason = FailureReason::NoFinalMarker;
  /// Character offset in the parsed text where the problem was detected.
  std::size_t offset = 0;

  bool operator==(const ParseFailure&) const = default;
};

template <typename T>
using ParseResult = std::variant<T, ParseFailure>;

/// One history event quoted inside a reasoning path.
struct PathEvent {
  std::string title;
  std::optional<std::string> timestamp;

  bool operator==(const PathEvent&) const = default;
};

struct ReasoningPath {
  std::string factor_name;
  std::string factor_kind;
  std::vector<PathEvent> events;

  bool operator==(const ReasoningPath&) const = default;
};

/// scores[p][j] is the match of path p against candidate
/// candidate_indices[j]. Columns are ascending by candidate index.
struct MatchMatrix {
  std::vector<std::vector<double>> scores;
  std::vector<int> candidate_indices;

  std::size_t path_count() const { return scores.size(); }
  std::size_t candidate_count() const { return candidate_indices.size(); }
  bool operator==(const MatchMatrix&) const = default;
};

struct ImportanceWeights {
  std::vector<double> raw;

  bool operator==(const ImportanceWeights&) const = default;
};

struct PlainTrace {
  bool operator==(const PlainTrace&) const = default;
};

struct StructuralTrace {
  std::vector<ReasoningPath> paths;
  MatchMatrix matrix;
  ImportanceWeights weights;
  std::optional<std::vector<int>> llm_ranking;

  bool operator==(const StructuralTrace&) const = default;
};

struct SscTrace {
  std::vector<std::string> paths;
  std::string summary;

  bool operator==(const SscTrace&) const = default;
};

struct ParsedTrace {
  std::variant<PlainTrace, StructuralTrace, SscTrace> body;
  std::optional<int> final_pick;

  bool is_structural() const { return std::holds_alternative<StructuralTrace>(body); }
  const StructuralTrace& structural() const { return std::get<StructuralTrace>(body); }
  bool operator==(const ParsedTrace&) const = default;
};

/// Last line of the form `FINAL_ANSWER: <integer>` wins; the integer must
/// lie in [1, 50].
ParseResult<int> parse_final_pick(std::string_view text);

/// Contents of the last ``` fenced block (fence lines excluded).
ParseResult<std::string> extract_structured_block(std::string_view text);

ParseResult<ParsedTrace> parse_plain(std::string_view text);

/// Validates
/// `{"paths":[{"factor","kind","events"}], "match_scores":{"<idx>":[s1..sP]},
///   "weights":[w1..wP], "ranking":[...]}`
/// with scores in [0,1], weights >= 0 and candidate indices in [1,50].
/// A FINAL_ANSWER line anywhere in the text is recorded as the model's pick.
ParseResult<ParsedTrace> parse_structural(std::string_view text);

/// Inverse of serialize_trace for the self-consistency layout.
ParseResult<ParsedTrace> parse_ssc(std::string_view text);

/// Canonical text form. For well-formed traces the matching parse_*
/// function returns the trace unchanged.
std::string serialize_trace(const ParsedTrace& trace);

std::string ssc_path_header(std::size_t ordinal);
inline constexpr std::string_view kSscSummaryHeader = "=== SUMMARY ===";

nlohmann::ordered_json trace_to_json(const ParseResult<ParsedTrace>& trace);
ParseResult<ParsedTrace> trace_from_json(const nlohmann::ordered_json& j);

}  // namespace coldrec
