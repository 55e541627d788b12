#include "coldrec/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "coldrec/catalog.hpp"
#include "coldrec/curation.hpp"
#include "coldrec/error.hpp"
#include "coldrec/gateway.hpp"
#include "coldrec/reward_service.hpp"
#include "coldrec/scoring.hpp"
#include "coldrec/strategies.hpp"
#include "coldrec/taskgen.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

std::string RunConfig::resolved_tasks_path() const {
  return tasks_path.empty() ? (std::filesystem::path(out_dir) / "tasks.jsonl").string() : tasks_path;
}

namespace {

std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::MissingFile, what + " " + path);
}

Date require_cutoff(const RunConfig& c) {
  if (c.cutoff_date.empty()) throw Error(ErrorCode::ConfigError, "--cutoff is required");
  auto d = parse_date(c.cutoff_date);
  if (!d) throw Error(ErrorCode::ConfigError, "invalid --cutoff '" + c.cutoff_date + "'");
  return *d;
}

struct Loaded {
  Catalog catalog;
  InteractionLog log;
};

Loaded load_inputs(const RunConfig& c) {
  require_file(c.catalog_path, "catalog");
  require_file(c.interactions_path, "interactions");
  Loaded in;
  in.catalog = load_catalog(c.catalog_path);
  in.log = load_interactions(c.interactions_path, in.catalog);
  return in;
}

StrategyConfig strategy_config(const RunConfig& c) {
  StrategyConfig s;
  s.model = c.model;
  s.max_history_len = c.max_history_len;
  s.ssc_k = c.ssc_k;
  s.temperature = c.temperature;
  s.ssc_sample_temperature = c.ssc_sample_temperature;
  s.ssc_summary_temperature = c.ssc_summary_temperature;
  s.max_tokens = c.max_tokens;
  return s;
}

std::shared_ptr<ChatBackend> make_backend(const RunConfig& c) {
  if (!c.mock_script.empty()) {
    require_file(c.mock_script, "mock script");
    return load_mock_script(c.mock_script);
  }
  if (!c.backend_url.empty()) {
    return std::make_shared<HttpBackend>(c.backend_url, c.api_key, std::chrono::seconds(c.timeout_s));
  }
  throw Error(ErrorCode::ConfigError, "no backend: pass --mock-script or --backend-url (or set LLM_BASE_URL)");
}

std::vector<StrategyOutcome> load_all_outcomes(const RunConfig& c) {
  auto paths = c.outcomes_paths;
  if (paths.empty()) paths.push_back(out_path(c, "outcomes.jsonl"));
  std::vector<StrategyOutcome> all;
  for (const auto& p : paths) {
    require_file(p, "outcomes");
    auto part = load_outcomes(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

// Outcomes on disk do not store prompts; rebuild them from the tasks and
// the same template set, refusing if the templates changed since the run.
void restore_prompts(std::vector<StrategyOutcome>& outcomes, const RunConfig& c) {
  require_file(c.resolved_tasks_path(), "tasks");
  require_file(c.catalog_path, "catalog");
  const auto tasks = load_tasks(c.resolved_tasks_path());
  const auto catalog = load_catalog(c.catalog_path);
  const auto templates = TemplateSet::load(c.templates_dir);
  const auto config = strategy_config(c);
  std::map<std::string, const RerankTask*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  for (auto& o : outcomes) {
    auto it = by_id.find(o.task_id);
    if (it == by_id.end()) throw Error(ErrorCode::ConfigError, "outcome for unknown task " + o.task_id);
    if (templates.version(o.strategy) != o.template_version) {
      throw Error(ErrorCode::ConfigError, "templates changed since outcome " + o.task_id + " was produced");
    }
    auto bundle = build_prompt(*it->second, o.strategy, templates, config, catalog);
    o.prompts = {bundle.calls.front().request.messages.back().content};
  }
}

std::optional<EvalReport> load_baseline(const RunConfig& c) {
  if (c.baseline_report.empty()) return std::nullopt;
  require_file(c.baseline_report, "baseline report");
  return report_from_json(read_file(c.baseline_report));
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "strategy=" << r.strategy << " n_tasks=" << r.overall.n_tasks << " anyplay_recall1=" << std::fixed
      << std::setprecision(3) << r.overall.anyplay_recall1 << " discovery_recall1=";
  if (r.overall.discovery_recall1) {
    out << *r.overall.discovery_recall1;
  } else {
    out << "n/a";
  }
  out << " parse_failure_rate=" << r.overall.parse_failure_rate << "\n";
  out.unsetf(std::ios::floatfield);
}

int cmd_ingest(const RunConfig& c, std::ostream& out) {
  auto in = load_inputs(c);
  ojson j;
  j["n_items"] = in.catalog.size();
  j["n_users"] = in.log.by_user.size();
  j["n_interactions"] = in.log.total;
  write_file(out_path(c, "ingest_summary.json"), j.dump(2) + "\n");
  out << "items=" << in.catalog.size() << " users=" << in.log.by_user.size() << " interactions=" << in.log.total
      << "\n";
  return 0;
}

int cmd_split(const RunConfig& c, std::ostream& out) {
  auto in = load_inputs(c);
  const auto split = split_cold_start(in.catalog, in.log, require_cutoff(c));
  ojson j;
  j["cutoff_date"] = format_date(split.cutoff_date);
  j["n_warm_items"] = split.warm_items.size();
  j["n_cold_items"] = split.cold_items.size();
  j["n_users"] = split.per_user_history.size();
  j["n_cold_mode_users"] = split.cold_targets.size();
  j["n_warm_mode_users"] = split.warm_targets.size();
  j["dropped_cold_interactions"] = split.dropped_cold_interactions;
  j["dropped_tied_interactions"] = split.dropped_tied_interactions;
  write_file(out_path(c, "split_summary.json"), j.dump(2) + "\n");
  out << "warm_items=" << split.warm_items.size() << " cold_items=" << split.cold_items.size()
      << " cold_mode_users=" << split.cold_targets.size() << " warm_mode_users=" << split.warm_targets.size()
      << " dropped_cold_interactions=" << split.dropped_cold_interactions << "\n";
  return 0;
}

int cmd_tasks(const RunConfig& c, std::ostream& out) {
  auto in = load_inputs(c);
  const auto split = split_cold_start(in.catalog, in.log, require_cutoff(c));
  std::unique_ptr<WarmRanker> ranker;
  if (c.ranker == "popularity") {
    ranker = std::make_unique<PopularityRanker>(split);
  } else if (c.ranker == "file") {
    require_file(c.baseline_scores_path, "baseline scores");
    ranker = std::make_unique<FileRanker>(FileRanker::load(c.baseline_scores_path, in.catalog));
  } else {
    throw Error(ErrorCode::ConfigError, "ranker must be popularity or file");
  }
  TaskConfig tc;
  tc.max_history_len = c.max_history_len;
  const auto tasks = build_tasks(parse_task_mode(c.mode), split, in.catalog, *ranker, tc, c.seed);
  save_tasks(c.resolved_tasks_path(), tasks);
  out << "tasks=" << tasks.size() << " mode=" << c.mode << " -> " << c.resolved_tasks_path() << "\n";
  return 0;
}

int cmd_run(const RunConfig& c, std::ostream& out) {
  require_file(c.resolved_tasks_path(), "tasks");
  require_file(c.catalog_path, "catalog");
  const auto strategy = parse_strategy(c.strategy);
  const auto tasks = load_tasks(c.resolved_tasks_path());
  const auto catalog = load_catalog(c.catalog_path);
  const auto templates = TemplateSet::load(c.templates_dir);
  const auto baseline = load_baseline(c);

  GatewayOptions options;
  options.max_concurrency = c.max_concurrency;
  options.retry.max_retries = c.max_retries;
  Gateway gateway(make_backend(c), options);

  const auto outcomes =
      run_batch(tasks, strategy, gateway, templates, strategy_config(c), catalog, c.max_concurrency);
  auto report = evaluate(outcomes);
  if (baseline) attach_baseline(report, *baseline);

  save_outcomes(out_path(c, "outcomes.jsonl"), outcomes);
  write_file(out_path(c, "report.json"), report_to_json(report));
  print_report(out, report);
  return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const auto outcomes = load_all_outcomes(c);
  auto report = evaluate(outcomes);
  if (auto baseline = load_baseline(c)) attach_baseline(report, *baseline);
  write_file(out_path(c, "report.json"), report_to_json(report));
  print_report(out, report);
  return 0;
}

int cmd_curate_sft(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto outcomes = load_all_outcomes(c);
  restore_prompts(outcomes, c);
  const auto examples = collect_sft(outcomes);
  if (examples.empty()) err << "warning: NoSuccesses - no outcome earned reward 1.0; sft corpus is empty\n";
  std::map<std::string, int> targets;
  for (const auto& o : outcomes) targets[o.task_id] = o.target_index;
  for (const auto& e : examples) {
    if (reward(evaluate_completion(e.strategy, e.completion), targets.at(e.task_id)) != kRewardCorrect) {
      throw Error(ErrorCode::ConfigError, "sft example for " + e.task_id + " does not replay to reward 1.0");
    }
  }
  export_jsonl(std::span<const SftExample>(examples), out_path(c, "sft.jsonl"));
  out << "sft_examples=" << examples.size() << "\n";
  return 0;
}

int cmd_curate_grpo(const RunConfig& c, std::ostream& out) {
  auto outcomes = load_all_outcomes(c);
  restore_prompts(outcomes, c);
  const auto prompts = build_grpo_prompts(outcomes, c.oversample_factor, c.seed);
  export_jsonl(std::span<const GrpoPrompt>(prompts), out_path(c, "grpo.jsonl"));
  out << "grpo_prompts=" << prompts.size() << "\n";
  return 0;
}

RewardService* g_active_service = nullptr;

int cmd_serve_reward(const RunConfig& c, std::ostream& out) {
  require_file(c.resolved_tasks_path(), "tasks");
  RewardService service(load_tasks(c.resolved_tasks_path()));
  const int port = service.bind("127.0.0.1", c.port);
  out << "reward service listening on 127.0.0.1:" << port << "\n" << std::flush;
  g_active_service = &service;
  auto on_signal = [](int) {
    if (g_active_service) g_active_service->stop();
  };
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.serve();
  g_active_service = nullptr;
  return 0;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const auto baseline = load_baseline(c);
  if (!baseline) throw Error(ErrorCode::ConfigError, "report needs --baseline-report");
  if (c.report_paths.empty()) throw Error(ErrorCode::ConfigError, "report needs --reports");
  ojson rows = ojson::array();
  out << std::left << std::setw(24) << "strategy" << std::setw(12) << "anyplay" << std::setw(12) << "discovery"
      << std::setw(12) << "anyplay%" << "discovery%\n";
  for (const auto& path : c.report_paths) {
    require_file(path, "report");
    auto r = report_from_json(read_file(path));
    attach_baseline(r, *baseline);
    ojson row;
    row["report"] = path;
    row["strategy"] = r.strategy;
    row["anyplay_recall1"] = r.overall.anyplay_recall1;
    row["discovery_recall1"] = r.overall.discovery_recall1 ? ojson(*r.overall.discovery_recall1) : ojson();
    row["anyplay_pct"] = r.relative_to->anyplay_pct;
    row["discovery_pct"] = r.relative_to->discovery_pct ? ojson(*r.relative_to->discovery_pct) : ojson();
    rows.push_back(row);

    std::ostringstream any, disc, anyp, discp;
    any << std::fixed << std::setprecision(3) << r.overall.anyplay_recall1;
    disc << std::fixed << std::setprecision(3) << r.overall.discovery_recall1.value_or(0.0);
    anyp << std::fixed << std::setprecision(2) << std::showpos << r.relative_to->anyplay_pct << "%";
    if (r.relative_to->discovery_pct) {
      discp << std::fixed << std::setprecision(2) << std::showpos << *r.relative_to->discovery_pct << "%";
    } else {
      discp << "n/a";
    }
    out << std::setw(24) << r.strategy << std::setw(12) << any.str() << std::setw(12) << disc.str() << std::setw(12)
        << anyp.str() << discp.str() << "\n";
  }
  ojson j;
  j["baseline"] = baseline->strategy;
  j["rows"] = rows;
  write_file(out_path(c, "comparison.json"), j.dump(2) + "\n");
  return 0;
}

bool given_on_command_line(const std::vector<std::string>& args, std::string_view flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.starts_with(std::string(flag) + "=");
  });
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Cold-start LLM re-ranking pipeline", "coldrec"};
  app.set_config("--config", "", "Flat key = value config file; flags override it");
  app.require_subcommand(1, 1);

  app.add_option("--catalog", c.catalog_path, "items.csv");
  app.add_option("--interactions", c.interactions_path, "interactions.csv");
  app.add_option("--templates", c.templates_dir, "Prompt template directory");
  app.add_option("--out,--out_dir", c.out_dir, "Output directory");
  app.add_option("--tasks,--tasks_path", c.tasks_path, "tasks.jsonl (default <out>/tasks.jsonl)");
  app.add_option("--outcomes", c.outcomes_paths, "outcomes.jsonl files (default <out>/outcomes.jsonl)");
  app.add_option("--reports", c.report_paths, "report.json files to compare");
  app.add_option("--baseline-report,--baseline_report", c.baseline_report, "report.json used as the baseline");
  app.add_option("--baseline-scores,--baseline_scores", c.baseline_scores_path, "baseline_scores.csv");
  app.add_option("--ranker", c.ranker, "popularity | file");
  app.add_option("--cutoff,--cutoff_date", c.cutoff_date, "Cold-start cutoff date YYYY-MM-DD");
  app.add_option("--mode", c.mode, "cold | warm");
  app.add_option("--strategy", c.strategy,
                 "direct_rec | base_reason | fast_reason | structural | soft_self_consistency");
  app.add_option("--backend-url,--backend_url", c.backend_url, "Chat-completion base URL (env LLM_BASE_URL)");
  app.add_option("--api-key,--api_key", c.api_key, "Credential (env LLM_API_KEY)");
  app.add_option("--mock-script,--mock_script", c.mock_script, "Scripted mock backend JSON");
  app.add_option("--model", c.model, "Model name sent to the backend");
  app.add_option("--seed", c.seed, "Global seed");
  app.add_option("--max-history-len,--max_history_len", c.max_history_len, "Base history length")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  app.add_option("--ssc-k,--ssc_k", c.ssc_k, "Self-consistency sample count")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  app.add_option("--oversample-factor,--oversample_factor", c.oversample_factor, "GRPO success replication")
      ->check(CLI::Range(1, 1000));
  app.add_option("--max-concurrency,--max_concurrency", c.max_concurrency, "In-flight request cap")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
  app.add_option("--max-retries,--max_retries", c.max_retries, "Retries for 429/5xx/transport")
      ->check(CLI::Range(0, 20));
  app.add_option("--max-tokens,--max_tokens", c.max_tokens, "Completion token limit")->check(CLI::PositiveNumber);
  app.add_option("--timeout,--timeout_s", c.timeout_s, "HTTP timeout in seconds")->check(CLI::PositiveNumber);
  app.add_option("--temperature", c.temperature, "Single-call temperature")->check(CLI::NonNegativeNumber);
  app.add_option("--ssc-sample-temperature,--ssc_sample_temperature", c.ssc_sample_temperature)
      ->check(CLI::NonNegativeNumber);
  app.add_option("--ssc-summary-temperature,--ssc_summary_temperature", c.ssc_summary_temperature)
      ->check(CLI::NonNegativeNumber);
  app.add_option("--port", c.port, "Reward service port (loopback only)")->check(CLI::Range(0, 65535));

  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"ingest", "Load and validate the catalog and interaction log"},
      {"split", "Compute the cold-start split and write split_summary.json"},
      {"tasks", "Assemble 50-candidate re-ranking tasks into tasks.jsonl"},
      {"run", "Run one strategy over all tasks; writes outcomes.jsonl and report.json"},
      {"eval", "Recompute report.json from outcomes files"},
      {"curate-sft", "Export successful trajectories to sft.jsonl"},
      {"curate-grpo", "Export oversampled prompts to grpo.jsonl"},
      {"serve-reward", "Serve POST /v1/reward on 127.0.0.1"},
      {"report", "Compare reports against a baseline report"},
  };
  for (const auto& [name, help] : subcommands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (!given_on_command_line(args, "--backend-url") && !given_on_command_line(args, "--backend_url")) {
    if (const char* url = std::getenv("LLM_BASE_URL"); url && *url) c.backend_url = url;
  }
  if (!given_on_command_line(args, "--api-key") && !given_on_command_line(args, "--api_key")) {
    if (const char* key = std::getenv("LLM_API_KEY"); key && *key) c.api_key = key;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "ingest") return cmd_ingest(c, out);
    if (command == "split") return cmd_split(c, out);
    if (command == "tasks") return cmd_tasks(c, out);
    if (command == "run") return cmd_run(c, out);
    if (command == "eval") return cmd_eval(c, out);
    if (command == "curate-sft") return cmd_curate_sft(c, out, err);
    if (command == "curate-grpo") return cmd_curate_grpo(c, out);
    if (command == "serve-reward") return cmd_serve_reward(c, out);
    if (command == "report") return cmd_report(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace coldrec
