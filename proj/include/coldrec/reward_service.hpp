#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coldrec/taskgen.hpp"

namespace httplib {
class Server;
}

namespace coldrec {

struct RewardReply {
  int status = 200;
  std::string body;
};

/// Scores `(task_id, completion)` pairs for an external trainer:
/// `POST /v1/reward` with `{"task_id": "...", "completion": "..."}` returns
/// `{"reward": 1.0|-0.1|-1.0, "pick": N|null}`.
class RewardService {
 public:
  explicit RewardService(const std::vector<RerankTask>& tasks);
  ~RewardService();

  RewardService(const RewardService&) = delete;
  RewardService& operator=(const RewardService&) = delete;

  /// Request handling without the network; also what the server calls.
  RewardReply handle(std::string_view body) const;

  /// Binds to `host:port`; port 0 picks a free one. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  std::map<std::string, int, std::less<>> targets_;
  std::unique_ptr<httplib::Server> server_;
};

/// JSON text of the reply body the service sends for a pick.
std::string reward_body(double reward, const std::optional<int>& pick);

}  // namespace coldrec
