#include "coldrec/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "coldrec/error.hpp"
#include "coldrec/util.hpp"

namespace coldrec {

namespace {

constexpr int kMinIndex = 1;
constexpr int kMaxIndex = 50;
constexpr int kMaxJsonDepth = 64;

struct Line {
  std::string_view text;  // without the newline
  std::size_t offset;     // start of the line
  std::size_t next;       // start of the following line
};

std::vector<Line> lines_of(std::string_view text) {
  std::vector<Line> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      out.push_back({text.substr(pos), pos, text.size()});
      break;
    }
    out.push_back({text.substr(pos, end - pos), pos, end + 1});
    pos = end + 1;
  }
  return out;
}

// Integer payload of a marker line, or nullopt when the line is not one.
std::optional<std::string_view> marker_payload(std::string_view line) {
  auto t = trim(line);
  if (!t.starts_with(kFinalMarker)) return std::nullopt;
  auto payload = trim(t.substr(kFinalMarker.size()));
  std::size_t i = 0;
  if (!payload.empty() && payload[0] == '-') i = 1;
  if (i == payload.size()) return std::nullopt;
  for (; i < payload.size(); ++i) {
    if (payload[i] < '0' || payload[i] > '9') return std::nullopt;
  }
  return payload;
}

ParseResult<int> index_from_payload(std::string_view payload, std::size_t offset) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(payload.data(), payload.data() + payload.size(), value);
  if (ec != std::errc() || ptr != payload.data() + payload.size() || value < kMinIndex || value > kMaxIndex) {
    return ParseFailure{FailureReason::IndexOutOfRange, offset};
  }
  return value;
}

struct Block {
  std::string_view content;
  std::size_t offset;
};

std::variant<Block, ParseFailure> find_last_block(std::string_view text) {
  std::optional<Block> last;
  bool open = false;
  std::size_t open_offset = 0;
  std::size_t content_start = 0;
  for (const auto& line : lines_of(text)) {
    if (!trim(line.text).starts_with("```")) continue;
    if (!open) {
      open = true;
      open_offset = line.offset;
      content_start = line.next;
    } else {
      open = false;
      auto content = text.substr(content_start, line.offset - content_start);
      if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
      last = Block{content, content_start};
    }
  }
  if (open) return ParseFailure{FailureReason::BadJson, open_offset};
  if (!last) return ParseFailure{FailureReason::BadJson, text.size()};
  return *last;
}

// nlohmann's parser recurses per nesting level; refuse pathological depth
// before handing it arbitrary model output.
bool nesting_within_limit(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : s) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      if (++depth > kMaxJsonDepth) return false;
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return true;
}

std::optional<int> canonical_index_key(const std::string& key) {
  if (key.empty() || key.size() > 9) return std::nullopt;
  if (key.size() > 1 && key[0] == '0') return std::nullopt;
  int value = 0;
  for (char c : key) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

std::optional<double> finite_number(const nlohmann::json& v) {
  if (!v.is_number()) return std::nullopt;
  const double d = v.get<double>();
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

ParseResult<ParsedTrace> structural_from_json(const nlohmann::json& j, std::size_t at) {
  auto fail = [at](FailureReason r) { return ParseFailure{r, at}; };
  if (!j.is_object()) return fail(FailureReason::SchemaViolation);

  StructuralTrace st;
  auto paths_it = j.find("paths");
  if (paths_it == j.end() || !paths_it->is_array() || paths_it->empty()) {
    return fail(FailureReason::SchemaViolation);
  }
  for (const auto& p : *paths_it) {
    if (!p.is_object()) return fail(FailureReason::SchemaViolation);
    ReasoningPath path;
    auto factor = p.find("factor");
    if (factor == p.end() || !factor->is_string() || factor->get<std::string>().empty()) {
      return fail(FailureReason::SchemaViolation);
    }
    path.factor_name = factor->get<std::string>();
    auto kind = p.find("kind");
    if (kind == p.end() || kind->is_null()) {
      path.factor_kind = "other";
    } else if (kind->is_string()) {
      path.factor_kind = kind->get<std::string>();
    } else {
      return fail(FailureReason::SchemaViolation);
    }
    auto events = p.find("events");
    if (events == p.end() || !events->is_array() || events->empty()) {
      return fail(FailureReason::SchemaViolation);
    }
    for (const auto& ev : *events) {
      PathEvent event;
      if (ev.is_string()) {
        event.title = ev.get<std::string>();
      } else if (ev.is_object()) {
        auto title = ev.find("title");
        if (title == ev.end() || !title->is_string()) return fail(FailureReason::SchemaViolation);
        event.title = title->get<std::string>();
        auto ts = ev.find("timestamp");
        if (ts != ev.end() && !ts->is_null()) {
          if (!ts->is_string()) return fail(FailureReason::SchemaViolation);
          event.timestamp = ts->get<std::string>();
        }
      } else {
        return fail(FailureReason::SchemaViolation);
      }
      path.events.push_back(std::move(event));
    }
    st.paths.push_back(std::move(path));
  }
  const std::size_t path_count = st.paths.size();

  auto weights_it = j.find("weights");
  if (weights_it == j.end() || !weights_it->is_array()) return fail(FailureReason::SchemaViolation);
  if (weights_it->size() != path_count) return fail(FailureReason::InconsistentDimensions);
  for (const auto& w : *weights_it) {
    auto value = finite_number(w);
    if (!value || *value < 0.0) return fail(FailureReason::SchemaViolation);
    st.weights.raw.push_back(*value);
  }

  auto scores_it = j.find("match_scores");
  if (scores_it == j.end() || !scores_it->is_object() || scores_it->empty()) {
    return fail(FailureReason::SchemaViolation);
  }
  std::map<int, std::vector<double>> columns;
  for (const auto& [key, row] : scores_it->items()) {
    auto index = canonical_index_key(key);
    if (!index) return fail(FailureReason::SchemaViolation);
    if (*index < kMinIndex || *index > kMaxIndex) return fail(FailureReason::IndexOutOfRange);
    if (!row.is_array()) return fail(FailureReason::SchemaViolation);
    if (row.size() != path_count) return fail(FailureReason::InconsistentDimensions);
    std::vector<double> column;
    for (const auto& s : row) {
      auto value = finite_number(s);
      if (!value || *value < 0.0 || *value > 1.0) return fail(FailureReason::SchemaViolation);
      column.push_back(*value);
    }
    columns[*index] = std::move(column);
  }
  st.matrix.scores.assign(path_count, {});
  for (const auto& [index, column] : columns) {
    st.matrix.candidate_indices.push_back(index);
    for (std::size_t p = 0; p < path_count; ++p) st.matrix.scores[p].push_back(column[p]);
  }

  auto ranking_it = j.find("ranking");
  if (ranking_it != j.end() && !ranking_it->is_null()) {
    if (!ranking_it->is_array()) return fail(FailureReason::SchemaViolation);
    std::vector<int> ranking;
    for (const auto& r : *ranking_it) {
      if (!r.is_number_integer()) return fail(FailureReason::SchemaViolation);
      const auto value = r.get<long long>();
      if (value < kMinIndex || value > kMaxIndex) return fail(FailureReason::IndexOutOfRange);
      ranking.push_back(static_cast<int>(value));
    }
    st.llm_ranking = std::move(ranking);
  }

  return ParsedTrace{std::move(st), std::nullopt};
}

nlohmann::ordered_json structural_to_json(const StructuralTrace& st) {
  nlohmann::ordered_json j;
  j["paths"] = nlohmann::ordered_json::array();
  for (const auto& p : st.paths) {
    nlohmann::ordered_json path;
    path["factor"] = p.factor_name;
    path["kind"] = p.factor_kind;
    path["events"] = nlohmann::ordered_json::array();
    for (const auto& ev : p.events) {
      nlohmann::ordered_json e;
      e["title"] = ev.title;
      if (ev.timestamp) e["timestamp"] = *ev.timestamp;
      path["events"].push_back(std::move(e));
    }
    j["paths"].push_back(std::move(path));
  }
  j["match_scores"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < st.matrix.candidate_indices.size(); ++c) {
    auto column = nlohmann::ordered_json::array();
    for (const auto& row : st.matrix.scores) column.push_back(row[c]);
    j["match_scores"][std::to_string(st.matrix.candidate_indices[c])] = std::move(column);
  }
  j["weights"] = st.weights.raw;
  if (st.llm_ranking) j["ranking"] = *st.llm_ranking;
  return j;
}

std::string dump(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string marker_line(int pick) { return std::string(kFinalMarker) + " " + std::to_string(pick); }

}  // namespace

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::NoFinalMarker: return "NoFinalMarker";
    case FailureReason::BadJson: return "BadJson";
    case FailureReason::SchemaViolation: return "SchemaViolation";
    case FailureReason::IndexOutOfRange: return "IndexOutOfRange";
    case FailureReason::InconsistentDimensions: return "InconsistentDimensions";
  }
  return "Unknown";
}

FailureReason parse_failure_reason(std::string_view text) {
  for (auto r : {FailureReason::NoFinalMarker, FailureReason::BadJson, FailureReason::SchemaViolation,
                 FailureReason::IndexOutOfRange, FailureReason::InconsistentDimensions}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::MalformedRow, "unknown parse failure reason '" + std::string(text) + "'");
}

ParseResult<int> parse_final_pick(std::string_view text) {
  std::optional<std::pair<std::string_view, std::size_t>> last;
  for (const auto& line : lines_of(text)) {
    if (auto payload = marker_payload(line.text)) last.emplace(*payload, line.offset);
  }
  if (!last) return ParseFailure{FailureReason::NoFinalMarker, text.size()};
  return index_from_payload(last->first, last->second);
}

ParseResult<std::string> extract_structured_block(std::string_view text) {
  auto block = find_last_block(text);
  if (auto* f = std::get_if<ParseFailure>(&block)) return *f;
  return std::string(std::get<Block>(block).content);
}

ParseResult<ParsedTrace> parse_plain(std::string_view text) {
  auto pick = parse_final_pick(text);
  if (auto* f = std::get_if<ParseFailure>(&pick)) return *f;
  return ParsedTrace{PlainTrace{}, std::get<int>(pick)};
}

ParseResult<ParsedTrace> parse_structural(std::string_view text) {
  auto found = find_last_block(text);
  if (auto* f = std::get_if<ParseFailure>(&found)) return *f;
  const Block block = std::get<Block>(found);
  if (!nesting_within_limit(block.content)) return ParseFailure{FailureReason::BadJson, block.offset};

  auto j = nlohmann::json::parse(block.content, nullptr, false);
  if (j.is_discarded()) return ParseFailure{FailureReason::BadJson, block.offset};

  auto result = structural_from_json(j, block.offset);
  if (auto* trace = std::get_if<ParsedTrace>(&result)) {
    if (auto pick = parse_final_pick(text); std::holds_alternative<int>(pick)) {
      trace->final_pick = std::get<int>(pick);
    }
  }
  return result;
}

std::string ssc_path_header(std::size_t ordinal) { return "=== PATH " + std::to_string(ordinal) + " ==="; }

ParseResult<ParsedTrace> parse_ssc(std::string_view text) {
  const auto lines = lines_of(text);
  std::vector<std::size_t> header_lines;
  std::optional<std::size_t> summary_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].text == ssc_path_header(header_lines.size() + 1) && !summary_line) {
      header_lines.push_back(i);
    } else if (lines[i].text == kSscSummaryHeader && !summary_line) {
      summary_line = i;
    }
  }
  if (header_lines.empty() || !summary_line || header_lines.back() > *summary_line) {
    return ParseFailure{FailureReason::SchemaViolation, text.size()};
  }
  if (lines[header_lines.front()].offset != 0) {
    return ParseFailure{FailureReason::SchemaViolation, 0};
  }

  auto section = [&](std::size_t begin, std::size_t end) {
    auto s = text.substr(begin, end - begin);
    if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
    return std::string(s);
  };

  SscTrace ssc;
  for (std::size_t h = 0; h < header_lines.size(); ++h) {
    const std::size_t next = h + 1 < header_lines.size() ? header_lines[h + 1] : *summary_line;
    ssc.paths.push_back(section(lines[header_lines[h]].next, lines[next].offset));
  }

  std::string_view region = text.substr(lines[*summary_line].next);
  ParsedTrace trace{SscTrace{}, std::nullopt};
  const auto last_nl = region.rfind('\n');
  const std::string_view last_line = last_nl == std::string_view::npos ? region : region.substr(last_nl + 1);
  if (auto payload = marker_payload(last_line)) {
    const std::size_t at = text.size() - last_line.size();
    auto pick = index_from_payload(*payload, at);
    if (auto* f = std::get_if<ParseFailure>(&pick)) return *f;
    trace.final_pick = std::get<int>(pick);
    ssc.summary = last_nl == std::string_view::npos ? std::string() : std::string(region.substr(0, last_nl));
  } else {
    ssc.summary = std::string(region.substr(0, region.size() - (region.ends_with('\n') ? 1 : 0)));
  }
  trace.body = std::move(ssc);
  return trace;
}

std::string serialize_trace(const ParsedTrace& trace) {
  std::string out;
  if (std::holds_alternative<StructuralTrace>(trace.body)) {
    out += "```json\n";
    out += dump(structural_to_json(std::get<StructuralTrace>(trace.body)));
    out += "\n```\n";
  } else if (const auto* ssc = std::get_if<SscTrace>(&trace.body)) {
    for (std::size_t i = 0; i < ssc->paths.size(); ++i) {
      out += ssc_path_header(i + 1);
      out += '\n';
      out += ssc->paths[i];
      out += '\n';
    }
    out += kSscSummaryHeader;
    out += '\n';
    out += ssc->summary;
    out += '\n';
  }
  if (trace.final_pick) out += marker_line(*trace.final_pick);
  return out;
}

nlohmann::ordered_json trace_to_json(const ParseResult<ParsedTrace>& result) {
  nlohmann::ordered_json j;
  if (const auto* f = std::get_if<ParseFailure>(&result)) {
    j["failure"] = {{"reason", to_string(f->reason)}, {"offset", f->offset}};
    return j;
  }
  const auto& trace = std::get<ParsedTrace>(result);
  if (std::holds_alternative<PlainTrace>(trace.body)) {
    j["variant"] = "plain";
  } else if (const auto* st = std::get_if<StructuralTrace>(&trace.body)) {
    j["variant"] = "structural";
    const auto body = structural_to_json(*st);
    for (const auto& [k, v] : body.items()) j[k] = v;
  } else {
    const auto& ssc = std::get<SscTrace>(trace.body);
    j["variant"] = "ssc";
    j["paths"] = ssc.paths;
    j["summary"] = ssc.summary;
  }
  j["final_pick"] = trace.final_pick ? nlohmann::ordered_json(*trace.final_pick) : nlohmann::ordered_json();
  return j;
}

ParseResult<ParsedTrace> trace_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.contains("failure")) {
      const auto& f = j.at("failure");
      return ParseFailure{parse_failure_reason(f.at("reason").get<std::string>()), f.at("offset").get<std::size_t>()};
    }
    ParsedTrace trace;
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "plain") {
      trace.body = PlainTrace{};
    } else if (variant == "structural") {
      auto parsed = structural_from_json(nlohmann::json::parse(j.dump()), 0);
      if (auto* f = std::get_if<ParseFailure>(&parsed)) {
        throw Error(ErrorCode::MalformedRow, "stored structural trace fails validation: " +
                                                 std::string(to_string(f->reason)));
      }
      trace.body = std::move(std::get<ParsedTrace>(parsed).body);
    } else if (variant == "ssc") {
      trace.body = SscTrace{j.at("paths").get<std::vector<std::string>>(), j.at("summary").get<std::string>()};
    } else {
      throw Error(ErrorCode::MalformedRow, "unknown trace variant '" + variant + "'");
    }
    if (j.contains("final_pick") && !j.at("final_pick").is_null()) trace.final_pick = j.at("final_pick").get<int>();
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("trace record: ") + e.what());
  }
}

}  // namespace coldrec
