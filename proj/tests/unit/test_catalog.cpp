#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "../support/expect_error.hpp"
#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"
#include "coldrec/catalog.hpp"
#include "coldrec/error.hpp"

using namespace coldrec;
using coldrec::testing::error_code_of;

namespace {

const char* kItems =
    "item_id,title,launch_date,genres,cast,directors\n"
    "A,Alpha,2020-01-01,Drama|Thriller,Mia Park,\n"
    "B,\"Beta, the Sequel\",2021-05-05,,,\n"
    "C,Gamma,2026-01-01,Action,Anna|Leo,Tom\n";

std::string data_dir() { return testing::data_dir() + "split10/"; }

}  // namespace

TEST_CASE("load_catalog parses rows and list columns") {
  const auto catalog = parse_catalog(kItems);
  CHECK(catalog.size() == 3);
  const auto& a = catalog.at("A");
  CHECK(a.genres == std::vector<std::string>{"Drama", "Thriller"});
  CHECK(a.cast == std::vector<std::string>{"Mia Park"});
  CHECK(a.directors.empty());
  CHECK(catalog.at("B").title == "Beta, the Sequel");
  CHECK(catalog.at("B").genres.empty());
  CHECK(format_date(catalog.at("C").launch_date) == "2026-01-01");
}

TEST_CASE("load_catalog error paths") {
  CHECK(error_code_of([] { load_catalog("/nonexistent/items.csv"); }) == ErrorCode::MissingFile);
  CHECK(error_code_of([] {
          parse_catalog("item_id,title,launch_date,genres,cast,directors\nm1,X,2020-01-01,,,\nm1,Y,2020-01-01,,,\n");
        }) == ErrorCode::DuplicateItemId);

  try {
    parse_catalog("item_id,title,launch_date,genres,cast,directors\nm1,X,2020-01-01,,,\nm2,Y,2025-13-40,,,\n");
    FAIL("expected MalformedRow");
  } catch (const MalformedRowError& e) {
    CHECK(e.line() == 3);
  }
  CHECK(error_code_of([] { parse_catalog("id,title\n"); }) == ErrorCode::MalformedRow);
  CHECK(error_code_of([] { parse_catalog("item_id,title,launch_date,genres,cast,directors\nm1,X,2020-02-30,,,\n"); }) ==
        ErrorCode::MalformedRow);
  CHECK(error_code_of([] { parse_catalog("item_id,title,launch_date,genres,cast,directors\nm1,X,2020-01-01,,\n"); }) ==
        ErrorCode::MalformedRow);
}

TEST_CASE("load_interactions groups per user and keeps file order on ties") {
  const auto catalog = parse_catalog(kItems);
  const auto log = parse_interactions(
      "user_id,item_id,timestamp,discovery\n"
      "u1,B,2024-01-02T00:00:00Z,0\n"
      "u2,A,2024-01-01T00:00:00Z,1\n"
      "u1,A,2024-01-01T00:00:00Z,1\n"
      "u1,C,2024-01-02T00:00:00Z,0\n"
      "u2,B,2024-03-01T00:00:00Z,0\n",
      catalog);
  CHECK(log.total == 5);
  REQUIRE(log.by_user.at("u1").size() == 3);
  CHECK(log.by_user.at("u2").size() == 2);
  const auto& u1 = log.by_user.at("u1");
  CHECK(u1[0].item_id == "A");
  CHECK(u1[1].item_id == "B");  // same timestamp as C, earlier in the file
  CHECK(u1[2].item_id == "C");
  CHECK(u1[0].discovery);

  CHECK(error_code_of([&] {
          parse_interactions("user_id,item_id,timestamp,discovery\nu1,Z,2024-01-01T00:00:00Z,0\n", catalog);
        }) == ErrorCode::UnknownItemId);
  CHECK(error_code_of([&] {
          parse_interactions("user_id,item_id,timestamp,discovery\nu1,A,2024-01-01T00:00:00Z,yes\n", catalog);
        }) == ErrorCode::MalformedRow);
  CHECK(error_code_of([&] {
          parse_interactions("user_id,item_id,timestamp,discovery\nu1,A,2024-01-01 00:00:00,0\n", catalog);
        }) == ErrorCode::MalformedRow);
}

TEST_CASE("split_cold_start on small examples") {
  const auto catalog = parse_catalog(
      "item_id,title,launch_date,genres,cast,directors\n"
      "A,A,2020-06-01,,,\nB,B,2021-06-01,,,\nC,C,2026-06-01,,,\n");
  const auto cutoff = *parse_date("2025-01-01");

  SUBCASE("cold = items launched after the cutoff") {
    const auto log = parse_interactions("user_id,item_id,timestamp,discovery\nx,A,2024-01-01T00:00:00Z,0\n", catalog);
    const auto split = split_cold_start(catalog, log, cutoff);
    CHECK(split.cold_items == std::set<std::string>{"C"});
    CHECK(split.warm_items == std::set<std::string>{"A", "B"});
  }
  SUBCASE("final cold interaction becomes a cold-mode target") {
    const auto log = parse_interactions(
        "user_id,item_id,timestamp,discovery\n"
        "x,A,2024-01-01T00:00:00Z,0\nx,B,2024-02-01T00:00:00Z,0\nx,C,2026-07-01T00:00:00Z,1\n",
        catalog);
    const auto split = split_cold_start(catalog, log, cutoff);
    REQUIRE(split.cold_targets.contains("x"));
    CHECK(split.cold_targets.at("x").item_id == "C");
    CHECK(split.cold_targets.at("x").discovery);
    REQUIRE(split.history("x").size() == 2);
    CHECK(split.history("x")[0].item_id == "A");
    CHECK(split.history("x")[1].item_id == "B");
  }
  SUBCASE("non-final cold interaction is dropped and the user goes to warm mode") {
    const auto log = parse_interactions(
        "user_id,item_id,timestamp,discovery\n"
        "x,A,2024-01-01T00:00:00Z,0\nx,C,2026-07-01T00:00:00Z,0\nx,B,2026-08-01T00:00:00Z,0\n",
        catalog);
    const auto split = split_cold_start(catalog, log, cutoff);
    CHECK(split.warm_targets.at("x").item_id == "B");
    CHECK(split.cold_targets.empty());
    REQUIRE(split.history("x").size() == 1);
    CHECK(split.history("x")[0].item_id == "A");
    CHECK(split.dropped_cold_interactions == 1);
  }
  SUBCASE("errors") {
    const auto log = parse_interactions("user_id,item_id,timestamp,discovery\nx,A,2024-01-01T00:00:00Z,0\n", catalog);
    CHECK(error_code_of([&] { split_cold_start(catalog, log, *parse_date("2019-01-01")); }) == ErrorCode::NoWarmItems);
    CHECK(error_code_of([&] { split_cold_start(catalog, InteractionLog{}, cutoff); }) == ErrorCode::EmptyLog);
  }
}

TEST_CASE("split matches the frozen reference partition of the 10-user fixture") {
  // expected.json was produced by tests/oracles/split_reference.py.
  const auto catalog = load_catalog(data_dir() + "items.csv");
  const auto log = load_interactions(data_dir() + "interactions.csv", catalog);
  const auto split = split_cold_start(catalog, log, *parse_date("2025-01-01"));
  const auto expected = nlohmann::json::parse(read_file(data_dir() + "expected.json"));

  CHECK(split.cold_items == expected["cold_items"].get<std::set<std::string>>());
  CHECK(split.warm_items == expected["warm_items"].get<std::set<std::string>>());
  CHECK(split.dropped_cold_interactions == expected["dropped_cold"].get<std::size_t>());
  CHECK(split.dropped_tied_interactions == expected["dropped_tied"].get<std::size_t>());
  for (const auto& [user, ref] : expected["users"].items()) {
    CAPTURE(user);
    const auto mode = ref["mode"].get<std::string>();
    const auto& targets = mode == "cold" ? split.cold_targets : split.warm_targets;
    REQUIRE(targets.contains(user));
    CHECK(targets.at(user).item_id == ref["target"].get<std::string>());
    CHECK(targets.at(user).discovery == ref["discovery"].get<bool>());
    std::vector<std::string> history;
    for (const auto& ev : split.history(user)) history.push_back(ev.item_id);
    CHECK(history == ref["history"].get<std::vector<std::string>>());
  }
  CHECK(split.cold_targets.size() + split.warm_targets.size() == expected["users"].size());
}

TEST_CASE("split invariants over synthetic logs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testing::SyntheticSpec spec;
    spec.users = 120;
    spec.seed = seed;
    const auto data = testing::make_synthetic(spec);
    const auto split = split_cold_start(data.catalog, data.log, testing::kCutoff);
    const auto again = split_cold_start(data.catalog, data.log, testing::kCutoff);
    CHECK(split == again);

    for (const auto& id : split.cold_items) CHECK(data.catalog.at(id).launch_date > split.cutoff_date);
    for (const auto& id : split.warm_items) CHECK_FALSE(split.cold_items.contains(id));
    for (const auto& [user, history] : split.per_user_history) {
      const auto& target = split.cold_targets.contains(user) ? split.cold_targets.at(user) : split.warm_targets.at(user);
      for (const auto& ev : history) {
        CHECK_FALSE(split.cold_items.contains(ev.item_id));
        CHECK(ev.timestamp < target.timestamp);
      }
    }

    const auto ref = testing::reference_split(data.catalog, data.flat, testing::kCutoff);
    CHECK(ref.dropped_cold == split.dropped_cold_interactions);
    CHECK(ref.dropped_tied == split.dropped_tied_interactions);
    for (const auto& [user, ru] : ref.users) {
      const auto& targets = ru.mode == "cold" ? split.cold_targets : split.warm_targets;
      REQUIRE(targets.contains(user));
      CHECK(targets.at(user).item_id == ru.target);
      std::vector<std::string> history;
      for (const auto& ev : split.history(user)) history.push_back(ev.item_id);
      CHECK(history == ru.history);
    }
  }
}

TEST_CASE("date and timestamp parsing") {
  CHECK(parse_date("2024-02-29"));
  CHECK_FALSE(parse_date("2023-02-29"));
  CHECK_FALSE(parse_date("2024-2-9"));
  CHECK_FALSE(parse_date("2024-02-29x"));
  auto ts = parse_timestamp("2024-05-01T12:30:05.250Z");
  REQUIRE(ts);
  CHECK(format_timestamp(*ts) == "2024-05-01T12:30:05.250Z");
  CHECK(format_timestamp(*parse_timestamp("2024-05-01T12:30:05Z")) == "2024-05-01T12:30:05Z");
  CHECK_FALSE(parse_timestamp("2024-05-01T12:30:05"));
  CHECK_FALSE(parse_timestamp("2024-05-01T25:30:05Z"));
  CHECK_FALSE(parse_timestamp("2024-05-01T12:30:05+01:00"));
}
