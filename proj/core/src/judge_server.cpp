#include "zrl/judge_server.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "zrl/errors.hpp"

namespace zrl {

struct JudgeServer::Impl {
  MockJudge judge;
  ExactMatchVerifier verifier;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = -1;

  Impl(const MockJudgeConfig& cfg, bool normalize_ws)
      : judge(cfg), verifier(normalize_ws) {}

  void install_routes() {
    server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        res.set_content(R"({"error":"body is not JSON"})", "application/json");
        return;
      }
      if (!body.is_object() || !body.contains("prompt") || !body["prompt"].is_string() ||
          !body.contains("response") || !body["response"].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"expected {\"prompt\":str,\"response\":str}"})",
                        "application/json");
        return;
      }
      nlohmann::json reply;
      reply["score"] = judge.score(body["prompt"].get<std::string>(),
                                   body["response"].get<std::string>());
      res.set_content(reply.dump(), "application/json");
    });

    server.Post("/verify", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        res.set_content(R"({"error":"body is not JSON"})", "application/json");
        return;
      }
      if (!body.is_object() || !body.contains("answer") || !body["answer"].is_string() ||
          !body.contains("reference") || !body["reference"].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"expected {\"answer\":str,\"reference\":str}"})",
                        "application/json");
        return;
      }
      nlohmann::json reply;
      reply["equal"] = verifier.equal(body["answer"].get<std::string>(),
                                      body["reference"].get<std::string>());
      res.set_content(reply.dump(), "application/json");
    });
  }

  int bind(const std::string& bind_host, int bind_port) {
    host = bind_host;
    if (bind_port == 0) {
      const int got = server.bind_to_any_port(bind_host);
      if (got < 0) throw JudgeUnavailable("judge server could not bind to " + bind_host);
      return got;
    }
    if (!server.bind_to_port(bind_host, bind_port)) {
      throw JudgeUnavailable("judge server could not bind to " + bind_host + ":" +
                             std::to_string(bind_port));
    }
    return bind_port;
  }
};

JudgeServer::JudgeServer(const MockJudgeConfig& judge_cfg, bool normalize_whitespace)
    : impl_(std::make_unique<Impl>(judge_cfg, normalize_whitespace)) {
  impl_->install_routes();
}

JudgeServer::~JudgeServer() { stop(); }

void JudgeServer::start(const std::string& host, int port) {
  impl_->port = impl_->bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void JudgeServer::serve_forever(const std::string& host, int port) {
  impl_->port = impl_->bind(host, port);
  impl_->server.listen_after_bind();
}

void JudgeServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int JudgeServer::port() const { return impl_->port; }

std::string JudgeServer::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

}  // namespace zrl
