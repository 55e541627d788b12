#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace coldrec {

/// Settings shared by every subcommand. Values come from flags, a flat
/// `key = value` config file (`--config`) and, for the backend, the
/// LLM_BASE_URL / LLM_API_KEY environment variables; flags win.
struct RunConfig {
  std::string catalog_path = "items.csv";
  std::string interactions_path = "interactions.csv";
  std::string templates_dir = "templates";
  std::string out_dir = "out";
  std::string tasks_path;  // default: <out_dir>/tasks.jsonl
  std::vector<std::string> outcomes_paths;
  std::vector<std::string> report_paths;
  std::string baseline_report;
  std::string baseline_scores_path;
  std::string ranker = "popularity";
  std::string cutoff_date;
  std::string mode = "cold";
  std::string strategy = "direct_rec";
  std::string backend_url;
  std::string api_key;
  std::string mock_script;
  std::string model = "default";
  std::uint64_t seed = 20250101;
  std::size_t max_history_len = 50;
  std::size_t ssc_k = 5;
  int oversample_factor = 2;
  std::size_t max_concurrency = 4;
  int max_retries = 4;
  int max_tokens = 2048;
  int timeout_s = 120;
  double temperature = 0.0;
  double ssc_sample_temperature = 0.8;
  double ssc_summary_temperature = 0.0;
  int port = 7311;

  std::string resolved_tasks_path() const;
};

/// Entry point behind the `coldrec` binary. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coldrec
