#include "coldrec/reward_service.hpp"

#include <httplib.h>
#include <json.hpp>

#include "coldrec/error.hpp"
#include "coldrec/scoring.hpp"
#include "coldrec/trace.hpp"

namespace coldrec {

using ojson = nlohmann::ordered_json;

namespace {

RewardReply error_reply(int status, const std::string& message) {
  ojson j;
  j["error"] = message;
  return {status, j.dump()};
}

}  // namespace

std::string reward_body(double reward, const std::optional<int>& pick) {
  ojson j;
  j["reward"] = reward;
  j["pick"] = pick ? ojson(*pick) : ojson();
  return j.dump();
}

RewardService::RewardService(const std::vector<RerankTask>& tasks) {
  for (const auto& t : tasks) targets_[t.task_id] = t.target_index;
}

RewardService::~RewardService() { stop(); }

RewardReply RewardService::handle(std::string_view body) const {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error_reply(400, "body must be a JSON object");
  auto task_id = j.find("task_id");
  auto completion = j.find("completion");
  if (task_id == j.end() || !task_id->is_string()) return error_reply(400, "task_id must be a string");
  if (completion == j.end() || !completion->is_string()) return error_reply(400, "completion must be a string");

  auto target = targets_.find(task_id->get<std::string>());
  if (target == targets_.end()) return error_reply(404, "unknown task_id " + task_id->get<std::string>());

  const auto pick = parse_final_pick(completion->get<std::string>());
  std::optional<int> picked;
  if (const int* p = std::get_if<int>(&pick)) picked = *p;
  return {200, reward_body(reward(pick, target->second), picked)};
}

int RewardService::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/v1/reward", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle(req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void RewardService::serve() {
  if (!server_) throw Error(ErrorCode::ConfigError, "bind() before serve()");
  server_->listen_after_bind();
}

void RewardService::stop() {
  if (server_) server_->stop();
}

}  // namespace coldrec
