#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "../support/synthetic.hpp"
#include "coldrec/cli.hpp"
#include "coldrec/curation.hpp"
#include "coldrec/scoring.hpp"
#include "coldrec/strategies.hpp"

using namespace coldrec;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  std::string out_text;
  std::string err_text;

  Workspace() {
    root = fs::temp_directory_path() / ("coldrec_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    testing::SyntheticSpec spec;
    spec.users = 40;
    spec.seed = 17;
    const auto data = testing::make_synthetic(spec);
    write_file((root / "items.csv").string(), data.items_csv);
    write_file((root / "interactions.csv").string(), data.interactions_csv);
  }
  ~Workspace() { fs::remove_all(root); }

  std::string path(const std::string& name) const { return (root / name).string(); }

  int run(std::vector<std::string> args) {
    const std::vector<std::pair<std::string, std::string>> defaults = {
        {"--catalog", path("items.csv")}, {"--interactions", path("interactions.csv")},
        {"--templates", COLDREC_TEMPLATES}, {"--out", path("out")}, {"--cutoff", "2025-01-01"}};
    std::vector<std::string> full = args;
    for (const auto& [flag, value] : defaults) {
      if (std::find(args.begin(), args.end(), flag) == args.end()) {
        full.push_back(flag);
        full.push_back(value);
      }
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(full, out, err);
    out_text = out.str();
    err_text = err.str();
    return code;
  }

  nlohmann::json json(const std::string& name) const { return nlohmann::json::parse(read_file(path(name))); }
};

}  // namespace

TEST_CASE("pipeline subcommands end to end with the mock backend") {
  Workspace ws;
  REQUIRE(ws.run({"ingest"}) == 0);
  CHECK(ws.json("out/ingest_summary.json")["n_items"] == 100);

  REQUIRE(ws.run({"split"}) == 0);
  const auto split = ws.json("out/split_summary.json");
  CHECK(split["n_cold_items"] == 20);
  CHECK(split["cutoff_date"] == "2025-01-01");

  REQUIRE(ws.run({"tasks", "--seed", "5"}) == 0);
  const auto tasks = load_tasks(ws.path("out/tasks.jsonl"));
  REQUIRE_FALSE(tasks.empty());
  const auto tasks_bytes = read_file(ws.path("out/tasks.jsonl"));
  REQUIRE(ws.run({"tasks", "--seed", "5"}) == 0);
  CHECK(read_file(ws.path("out/tasks.jsonl")) == tasks_bytes);

  // Every other task answered correctly.
  nlohmann::json script;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const int pick = i % 2 == 0 ? tasks[i].target_index : (tasks[i].target_index % 50) + 1;
    script["responses"][request_tag(tasks[i], StrategyKind::DirectRec, 1)] = "FINAL_ANSWER: " + std::to_string(pick);
  }
  write_file(ws.path("mock.json"), script.dump());
  REQUIRE(ws.run({"run", "--strategy", "direct_rec", "--mock-script", ws.path("mock.json")}) == 0);
  const auto report = ws.json("out/report.json");
  CHECK(report["strategy"] == "direct_rec");
  CHECK(report["n_tasks"] == tasks.size());
  CHECK(report["anyplay_recall1"].get<double>() == doctest::Approx(double((tasks.size() + 1) / 2) / tasks.size()));
  const auto outcomes_bytes = read_file(ws.path("out/outcomes.jsonl"));
  const auto report_bytes = read_file(ws.path("out/report.json"));
  REQUIRE(ws.run({"run", "--strategy", "direct_rec", "--mock-script", ws.path("mock.json")}) == 0);
  CHECK(read_file(ws.path("out/outcomes.jsonl")) == outcomes_bytes);
  CHECK(read_file(ws.path("out/report.json")) == report_bytes);

  REQUIRE(ws.run({"eval"}) == 0);
  CHECK(read_file(ws.path("out/report.json")) == report_bytes);

  REQUIRE(ws.run({"curate-sft"}) == 0);
  const auto sft = sft_from_jsonl(read_file(ws.path("out/sft.jsonl")));
  CHECK(sft.size() == (tasks.size() + 1) / 2);

  REQUIRE(ws.run({"curate-grpo", "--oversample-factor", "3"}) == 0);
  const auto grpo = grpo_from_jsonl(read_file(ws.path("out/grpo.jsonl")));
  CHECK(grpo.size() == 3 * sft.size() + (tasks.size() - sft.size()));
  CHECK(ws.out_text == "grpo_prompts=" + std::to_string(grpo.size()) + "\n");

  fs::copy_file(ws.path("out/report.json"), ws.path("baseline.json"));
  REQUIRE(ws.run({"report", "--reports", ws.path("out/report.json"), "--baseline-report", ws.path("baseline.json")}) == 0);
  CHECK(ws.out_text.find("direct_rec") != std::string::npos);
  CHECK(fs::exists(ws.path("out/comparison.json")));
}

TEST_CASE("config files and flag precedence") {
  Workspace ws;
  write_file(ws.path("run.toml"), "seed = 9\nmax_history_len = 3\nmode = \"warm\"\n");
  REQUIRE(ws.run({"tasks", "--config", ws.path("run.toml")}) == 0);
  const auto a = load_tasks(ws.path("out/tasks.jsonl"));
  REQUIRE_FALSE(a.empty());
  CHECK(a.front().mode == TaskMode::Warm);
  CHECK(a.front().seed == derive_seed(9, a.front().user_id));
  for (const auto& t : a) CHECK(t.history.size() <= 6);

  REQUIRE(ws.run({"tasks", "--config", ws.path("run.toml"), "--seed", "10"}) == 0);
  const auto b = load_tasks(ws.path("out/tasks.jsonl"));
  CHECK(b.front().seed == derive_seed(10, b.front().user_id));
}

TEST_CASE("failures exit nonzero without partial outputs") {
  Workspace ws;
  CHECK(ws.run({"bogus"}) != 0);
  CHECK(ws.run({"split", "--cutoff", "2025-99-01"}) == 1);
  CHECK(ws.err_text.find("invalid --cutoff") != std::string::npos);
  CHECK(ws.run({"run"}) == 1);  // no tasks yet
  CHECK(ws.err_text.find("error:") != std::string::npos);

  REQUIRE(ws.run({"tasks"}) == 0);
  CHECK(ws.run({"run", "--strategy", "direct_rec"}) == 1);  // no backend configured
  CHECK(ws.run({"run", "--strategy", "nonsense", "--mock-script", ws.path("none.json")}) == 1);
  CHECK(ws.run({"run", "--backend-url", "http://127.0.0.1:1", "--max-retries", "0", "--max-concurrency", "1"}) == 1);
  CHECK_FALSE(fs::exists(ws.path("out/outcomes.jsonl")));
  CHECK_FALSE(fs::exists(ws.path("out/report.json")));

  write_file(ws.path("empty.json"), "");
  CHECK(ws.run({"run", "--mock-script", ws.path("empty.json")}) == 1);
  CHECK(ws.err_text.find("UnknownTag") != std::string::npos);
}

TEST_CASE("curate-sft on a run without successes warns and writes an empty corpus") {
  Workspace ws;
  REQUIRE(ws.run({"tasks"}) == 0);
  write_file(ws.path("wrong.json"), R"({"default":"no answer here"})");
  REQUIRE(ws.run({"run", "--mock-script", ws.path("wrong.json")}) == 0);
  REQUIRE(ws.run({"curate-sft"}) == 0);
  CHECK(ws.err_text.find("NoSuccesses") != std::string::npos);
  CHECK(fs::file_size(ws.path("out/sft.jsonl")) == 0);
}
