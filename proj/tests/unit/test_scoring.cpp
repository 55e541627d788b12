#include <doctest.h>

#include <cmath>

#include "../support/expect_error.hpp"
#include "../support/oracles.hpp"
#include "../support/trace_gen.hpp"
#include "coldrec/scoring.hpp"

using namespace coldrec;
using coldrec::testing::error_code_of;

namespace {

MatchMatrix fixed_matrix() {
  return {{{0.9, 0.1, 0.55, 0.3, 0.0}, {0.2, 0.8, 0.55, 1.0, 0.4}, {0.4, 0.6, 0.95, 0.35, 1.0}}, {3, 7, 12, 31, 50}};
}

StrategyOutcome outcome(double r, bool discovery, bool failed = false,
                        StrategyKind kind = StrategyKind::DirectRec) {
  StrategyOutcome o;
  o.task_id = "t";
  o.strategy = kind;
  o.reward = r;
  o.target_discovery = discovery;
  o.final_pick = failed ? ParseResult<int>(ParseFailure{}) : ParseResult<int>(1);
  return o;
}

}  // namespace

TEST_CASE("aggregation matches the exact rational reference") {
  // Values from tests/oracles/aggregate_reference.py.
  const auto scores = aggregate(fixed_matrix(), {{2.5, 1.0, 0.5}});
  CHECK(std::abs(scores.overall.at(3) - 0.6625) <= 1e-12);
  CHECK(std::abs(scores.overall.at(7) - 0.3375) <= 1e-12);
  CHECK(std::abs(scores.overall.at(12) - 0.6) <= 1e-12);
  CHECK(std::abs(scores.overall.at(31) - 0.48125) <= 1e-12);
  CHECK(std::abs(scores.overall.at(50) - 0.225) <= 1e-12);
  const auto ranking = rank_candidates(scores, 50);
  REQUIRE(ranking.size() == 50);
  CHECK(std::vector<int>(ranking.begin(), ranking.begin() + 5) == std::vector<int>{3, 12, 31, 7, 50});
  // Unscored candidates follow in index order.
  CHECK(ranking[5] == 1);
  CHECK(ranking[6] == 2);
  CHECK(ranking[7] == 4);
  CHECK(ranking.back() == 49);
}

TEST_CASE("weight normalization") {
  auto n = normalize_weights({{1, 3}});
  CHECK(n.values == std::vector<double>{0.25, 0.75});
  CHECK_FALSE(n.degenerate);

  auto zero = normalize_weights({{0, 0, 0, 0}});
  CHECK(zero.degenerate);
  CHECK(zero.values == std::vector<double>{0.25, 0.25, 0.25, 0.25});

  CHECK(error_code_of([] { normalize_weights({{1, -0.5}}); }) == ErrorCode::NegativeWeight);
  CHECK(error_code_of([] { normalize_weights({{1, std::nan("")}}); }) == ErrorCode::NegativeWeight);
  CHECK(error_code_of([] { normalize_weights({{}}); }) == ErrorCode::DimensionMismatch);
  CHECK(error_code_of([] { aggregate(fixed_matrix(), {{1, 1}}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("ranking ties break by lower index") {
  ScoreVector s;
  s.overall = {{9, 0.5}, {2, 0.5}, {4, 0.7}};
  CHECK(rank_candidates(s, 10) == std::vector<int>{4, 2, 9, 1, 3, 5, 6, 7, 8, 10});
}

TEST_CASE("aggregate and rank agree with the brute-force oracle") {
  DeterministicRng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const std::size_t paths = 1 + rng.below(6);
    const auto m = testing::random_matrix(rng, paths, 1 + rng.below(50));
    const auto w = testing::random_weights(rng, paths);
    const auto got = aggregate(m, {w});
    const auto want = testing::reference_aggregate(m, w);
    REQUIRE(got.overall.size() == want.size());
    for (const auto& [idx, v] : want) CHECK(std::abs(got.overall.at(idx) - v) <= 1e-12);
    CHECK(rank_candidates(got, 50) == testing::reference_rank(got.overall, 50));
  }
}

TEST_CASE("scale invariance and zero-weight paths") {
  DeterministicRng rng(99);
  for (int i = 0; i < 50; ++i) {
    const std::size_t paths = 1 + rng.below(5);
    auto m = testing::random_matrix(rng, paths, 1 + rng.below(50));
    auto w = testing::random_weights(rng, paths);
    w[0] += 0.5;
    const auto base = rank_candidates(aggregate(m, {w}), 50);
    for (double c : {0.1, 3.0, 1000.0}) {
      auto scaled = w;
      for (auto& x : scaled) x *= c;
      CHECK(rank_candidates(aggregate(m, {scaled}), 50) == base);
    }
    auto extended = m;
    extended.scores.push_back(std::vector<double>(m.candidate_count(), 0.77));
    auto w_ext = w;
    w_ext.push_back(0.0);
    const auto a = aggregate(m, {w});
    const auto b = aggregate(extended, {w_ext});
    for (const auto& [idx, v] : a.overall) CHECK(std::abs(b.overall.at(idx) - v) <= 1e-15);
  }
}

TEST_CASE("reward table") {
  CHECK(reward(ParseResult<int>(7), 7) == 1.0);
  CHECK(reward(ParseResult<int>(6), 7) == -0.1);
  CHECK(reward(ParseResult<int>(ParseFailure{FailureReason::BadJson, 0}), 7) == -1.0);
}

TEST_CASE("recall and evaluation") {
  std::vector<StrategyOutcome> outs = {outcome(1.0, true), outcome(-0.1, true), outcome(-1.0, false, true),
                                       outcome(1.0, false)};
  CHECK(recall_at_1(outs, RecallMode::AnyPlay) == 0.5);
  CHECK(recall_at_1(outs, RecallMode::Discovery) == 0.5);
  std::vector<StrategyOutcome> none_disc = {outcome(1.0, false)};
  CHECK(error_code_of([&] { recall_at_1(none_disc, RecallMode::Discovery); }) == ErrorCode::EmptyEvalSet);
  CHECK(error_code_of([] { recall_at_1({}, RecallMode::AnyPlay); }) == ErrorCode::EmptyEvalSet);

  const auto report = evaluate(outs);
  CHECK(report.strategy == "direct_rec");
  CHECK(report.overall.n_tasks == 4);
  CHECK(report.overall.n_discovery_tasks == 2);
  CHECK(report.overall.parse_failure_rate == 0.25);

  const auto none = evaluate(none_disc);
  CHECK_FALSE(none.overall.discovery_recall1);

  outs.push_back(outcome(1.0, true, false, StrategyKind::Structural));
  const auto mixed = evaluate(outs);
  CHECK(mixed.strategy == "mixed");
  CHECK(mixed.per_strategy.size() == 2);
  CHECK(mixed.per_strategy.at("structural").anyplay_recall1 == 1.0);
}

TEST_CASE("relative performance") {
  CHECK(relative_performance(0.106, 0.098) == doctest::Approx(8.16).epsilon(1e-12));
  CHECK(relative_performance(0.045, 0.038) == doctest::Approx(18.42).epsilon(1e-12));
  CHECK(relative_performance(0.05, 0.10) == doctest::Approx(-50.0));
  CHECK(relative_performance(0.1, 0.1) == 0.0);
  CHECK_FALSE(std::signbit(relative_performance(0.1, 0.1)));
  CHECK(error_code_of([] { relative_performance(0.1, 0.0); }) == ErrorCode::ZeroBaseline);
}

TEST_CASE("report json round trip with baseline") {
  std::vector<StrategyOutcome> base = {outcome(1.0, true), outcome(-0.1, true), outcome(-0.1, false),
                                       outcome(-0.1, false)};
  std::vector<StrategyOutcome> better = {outcome(1.0, true), outcome(1.0, true), outcome(-0.1, false),
                                         outcome(-0.1, false)};
  auto report = evaluate(better);
  attach_baseline(report, evaluate(base));
  REQUIRE(report.relative_to);
  CHECK(report.relative_to->anyplay_pct == 100.0);
  CHECK(report.relative_to->discovery_pct == 100.0);
  const auto text = report_to_json(report);
  CHECK(text.find("\"anyplay_recall1\": 0.5") != std::string::npos);
  const auto back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  CHECK(text.find("\"strategy\"") < text.find("\"n_tasks\""));
}
