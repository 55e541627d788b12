#include <doctest.h>

#include <string>

#include "../support/trace_gen.hpp"
#include "coldrec/trace.hpp"

using namespace coldrec;

namespace {

ParseFailure failure_of(const auto& result) {
  REQUIRE(std::holds_alternative<ParseFailure>(result));
  return std::get<ParseFailure>(result);
}

FailureReason reason_of(const auto& result) { return failure_of(result).reason; }

int pick_of(const ParseResult<int>& r) {
  REQUIRE(std::holds_alternative<int>(r));
  return std::get<int>(r);
}

std::string block(const std::string& json, const std::string& tail = "\nFINAL_ANSWER: 3") {
  return "Some reasoning.\n```json\n" + json + "\n```" + tail;
}

const std::string kValid =
    R"({"paths":[{"factor":"Anna","kind":"actor","events":[{"title":"Film A","timestamp":"2024-01-02"}]},)"
    R"({"factor":"Tom","kind":"director","events":["Film B"]}],)"
    R"("match_scores":{"3":[0.9,0.2],"7":[0.1,0.8]},"weights":[2,1],"ranking":[3,7]})";

}  // namespace

TEST_CASE("final answer extraction") {
  CHECK(pick_of(parse_final_pick("I think 4.\nFINAL_ANSWER: 17")) == 17);
  CHECK(pick_of(parse_final_pick("FINAL_ANSWER: 2\nthen again\nFINAL_ANSWER: 5\n")) == 5);
  CHECK(pick_of(parse_final_pick("   FINAL_ANSWER:   9   ")) == 9);
  CHECK(pick_of(parse_final_pick("FINAL_ANSWER: 4\nFINAL_ANSWER: maybe 7")) == 4);
  CHECK(reason_of(parse_final_pick("the answer is 3")) == FailureReason::NoFinalMarker);
  CHECK(failure_of(parse_final_pick("abc")).offset == 3);
  CHECK(reason_of(parse_final_pick("")) == FailureReason::NoFinalMarker);
  CHECK(reason_of(parse_final_pick("FINAL_ANSWER: 0")) == FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_final_pick("FINAL_ANSWER: 51")) == FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_final_pick("FINAL_ANSWER: -3")) == FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_final_pick("FINAL_ANSWER: 99999999999999999999")) == FailureReason::IndexOutOfRange);
  CHECK(failure_of(parse_final_pick("x\nFINAL_ANSWER: 60")).offset == 2);
  CHECK(pick_of(parse_final_pick("FINAL_ANSWER: 1")) == 1);
  CHECK(pick_of(parse_final_pick("FINAL_ANSWER: 50")) == 50);
}

TEST_CASE("structured block extraction uses the last fenced block") {
  auto r = extract_structured_block("```\nfirst\n```\ntext\n```json\nsecond\n```\n");
  REQUIRE(std::holds_alternative<std::string>(r));
  CHECK(std::get<std::string>(r) == "second");
  CHECK(reason_of(extract_structured_block("no fences here")) == FailureReason::BadJson);
  CHECK(reason_of(extract_structured_block("```json\n{\"a\":1}\n")) == FailureReason::BadJson);
}

TEST_CASE("structural trace parsing") {
  auto r = parse_structural(block(kValid));
  REQUIRE(std::holds_alternative<ParsedTrace>(r));
  const auto& trace = std::get<ParsedTrace>(r);
  REQUIRE(trace.is_structural());
  const auto& st = trace.structural();
  REQUIRE(st.paths.size() == 2);
  CHECK(st.paths[0].factor_name == "Anna");
  CHECK(st.paths[0].events[0].timestamp == "2024-01-02");
  CHECK(st.paths[1].events[0].title == "Film B");
  CHECK_FALSE(st.paths[1].events[0].timestamp);
  CHECK(st.matrix.candidate_indices == std::vector<int>{3, 7});
  CHECK(st.matrix.scores[0] == std::vector<double>{0.9, 0.1});
  CHECK(st.matrix.scores[1] == std::vector<double>{0.2, 0.8});
  CHECK(st.weights.raw == std::vector<double>{2, 1});
  CHECK(st.llm_ranking == std::vector<int>{3, 7});
  CHECK(trace.final_pick == 3);

  SUBCASE("missing marker is fine for structural traces") {
    auto no_marker = parse_structural(block(kValid, ""));
    REQUIRE(std::holds_alternative<ParsedTrace>(no_marker));
    CHECK_FALSE(std::get<ParsedTrace>(no_marker).final_pick);
  }
  SUBCASE("kind defaults to other") {
    auto p = parse_structural(block(R"({"paths":[{"factor":"x","events":["e"]}],"match_scores":{"1":[0.5]},"weights":[1]})"));
    REQUIRE(std::holds_alternative<ParsedTrace>(p));
    CHECK(std::get<ParsedTrace>(p).structural().paths[0].factor_kind == "other");
  }
}

TEST_CASE("structural failure taxonomy") {
  const auto one_path = [](const std::string& scores, const std::string& weights = "[1]",
                           const std::string& extra = "") {
    return block(R"({"paths":[{"factor":"x","kind":"genre","events":["e"]}],"match_scores":)" + scores +
                 R"(,"weights":)" + weights + extra + "}");
  };
  CHECK(reason_of(parse_structural("no block at all\nFINAL_ANSWER: 2")) == FailureReason::BadJson);
  CHECK(reason_of(parse_structural(block("{not json"))) == FailureReason::BadJson);
  CHECK(reason_of(parse_structural(block(std::string(200, '[') + std::string(200, ']')))) == FailureReason::BadJson);
  CHECK(reason_of(parse_structural(block("[1,2]"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(block(R"({"paths":[],"match_scores":{"1":[]},"weights":[]})"))) ==
        FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[1.5]})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[-0.1]})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":["0.5"]})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[0.5]})", "[-1]"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[0.5]})", "[1,2]"))) == FailureReason::InconsistentDimensions);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[0.5,0.5]})"))) == FailureReason::InconsistentDimensions);
  CHECK(reason_of(parse_structural(one_path(R"({"51":[0.5]})"))) == FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_structural(one_path(R"({"0":[0.5]})"))) == FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_structural(one_path(R"({"07":[0.5]})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"x":[0.5]})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({})"))) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[0.5]})", "[1]", R"(,"ranking":[60])"))) ==
        FailureReason::IndexOutOfRange);
  CHECK(reason_of(parse_structural(one_path(R"({"1":[0.5]})", "[1]", R"(,"ranking":["1"])"))) ==
        FailureReason::SchemaViolation);
}

TEST_CASE("self-consistency layout") {
  const std::string text =
      "=== PATH 1 ===\nlikes thrillers\n=== PATH 2 ===\nlikes Anna\nsecond line\n=== SUMMARY ===\n"
      "Both agree on 12.\nFINAL_ANSWER: 12";
  auto r = parse_ssc(text);
  REQUIRE(std::holds_alternative<ParsedTrace>(r));
  const auto& trace = std::get<ParsedTrace>(r);
  const auto& ssc = std::get<SscTrace>(trace.body);
  CHECK(ssc.paths == std::vector<std::string>{"likes thrillers", "likes Anna\nsecond line"});
  CHECK(ssc.summary == "Both agree on 12.");
  CHECK(trace.final_pick == 12);
  CHECK(serialize_trace(trace) == text);

  CHECK(reason_of(parse_ssc("just text")) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_ssc("=== PATH 1 ===\nx\n")) == FailureReason::SchemaViolation);
  CHECK(reason_of(parse_ssc("=== PATH 1 ===\nx\n=== SUMMARY ===\ny\nFINAL_ANSWER: 77")) ==
        FailureReason::IndexOutOfRange);
}

TEST_CASE("serialize/parse round trip") {
  DeterministicRng rng(12345);
  for (int i = 0; i < 300; ++i) {
    const auto st = testing::random_structural(rng);
    const auto text = serialize_trace(st);
    auto back = parse_structural(text);
    REQUIRE(std::holds_alternative<ParsedTrace>(back));
    CHECK(std::get<ParsedTrace>(back) == st);
    CHECK(trace_from_json(trace_to_json(st)) == ParseResult<ParsedTrace>(st));

    const auto ssc = testing::random_ssc(rng);
    auto ssc_back = parse_ssc(serialize_trace(ssc));
    REQUIRE(std::holds_alternative<ParsedTrace>(ssc_back));
    CHECK(std::get<ParsedTrace>(ssc_back) == ssc);
    CHECK(trace_from_json(trace_to_json(ssc)) == ParseResult<ParsedTrace>(ssc));
  }
  const ParsedTrace plain{PlainTrace{}, 8};
  CHECK(serialize_trace(plain) == "FINAL_ANSWER: 8");
  CHECK(parse_plain(serialize_trace(plain)) == ParseResult<ParsedTrace>(plain));
  const ParseResult<ParsedTrace> failure = ParseFailure{FailureReason::BadJson, 17};
  CHECK(trace_from_json(trace_to_json(failure)) == failure);
}

TEST_CASE("random bytes never escape the parse result") {
  DeterministicRng rng(777);
  for (int i = 0; i < 2000; ++i) {
    std::string junk(rng.below(300), '\0');
    for (auto& c : junk) c = static_cast<char>(rng.below(256));
    if (rng.below(3) == 0) junk = "```json\n" + junk;
    if (rng.below(3) == 0) junk += "\nFINAL_ANSWER: " + std::to_string(rng.below(70));
    CHECK_NOTHROW(parse_final_pick(junk));
    CHECK_NOTHROW(parse_structural(junk));
    CHECK_NOTHROW(parse_ssc(junk));
  }
}
