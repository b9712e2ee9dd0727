#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "zrl/errors.hpp"
#include "zrl/judge_client.hpp"
#include "zrl/judge_server.hpp"
#include "zrl/mock_judge.hpp"
#include "zrl/report.hpp"
#include "zrl/trainer.hpp"

using namespace zrl;

namespace {

MockJudgeConfig desk_judge() {
  MockJudgeConfig cfg;
  cfg.length_bias_scale = 24.0;
  cfg.noise_std = 0.25;
  cfg.seed = 7;
  return cfg;
}

HttpBackendConfig client_config(const std::string& url, int retries = 2) {
  HttpBackendConfig cfg;
  cfg.base_url = url;
  cfg.timeout_ms = 2000;
  cfg.retries = retries;
  return cfg;
}

/// Minimal scriptable server for exercising the client's failure paths.
class ScriptedServer {
 public:
  ScriptedServer() {
    server_.Post("/score", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      respond(res);
    });
    server_.Post("/verify", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      respond(res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() const { return hits_.load(); }
  void reset_hits() { hits_ = 0; }

  /// Replies 500 for the first `n` requests, then 200 with `body`.
  void fail_first(int n) { fail_first_ = n; }
  void set_body(int script) { script_ = script; }

  // Reply scripts, chosen by index so the handler never reads test-thread
  // strings concurrently.
  static constexpr int kBodyNotJson = 0;
  static constexpr int kScoreString = 1;
  static constexpr int kScoreMissing = 2;
  static constexpr int kScoreOverflow = 3;
  static constexpr int kScoreOk = 4;

 private:
  void respond(httplib::Response& res) {
    if (hits_.load() <= fail_first_.load()) {
      res.status = 500;
      res.set_content("transient", "text/plain");
      return;
    }
    switch (script_.load()) {
      case kBodyNotJson: res.set_content("plain text", "text/plain"); break;
      case kScoreString: res.set_content(R"({"score":"high"})", "application/json"); break;
      case kScoreMissing: res.set_content(R"({"value":3})", "application/json"); break;
      case kScoreOverflow: res.set_content(R"({"score":1e999})", "application/json"); break;
      default: res.set_content(R"({"score":1.5})", "application/json"); break;
    }
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<int> hits_{0};
  std::atomic<int> fail_first_{0};
  std::atomic<int> script_{kScoreOk};
};

}  // namespace

TEST_CASE("score endpoint reproduces the in-process judge exactly") {
  const MockJudgeConfig cfg = desk_judge();
  JudgeServer server(cfg);
  server.start("127.0.0.1", 0);
  CHECK(server.port() > 0);

  const HttpJudge judge(client_config(server.base_url()));
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"tell me about water", "<thinking>hm</thinking><answer>water is wet</answer>"},
      {"tell me about water and fire", "<thinking></thinking><answer>much water</answer>"},
      {"3+4=?", "no tags at all"},
      {"", ""},
  };
  for (const auto& [prompt, response] : pairs) {
    CHECK(judge.score(prompt, response) == mock_judge_score(prompt, response, cfg));
  }
}

TEST_CASE("verify endpoint honours whitespace normalization") {
  JudgeServer lenient(desk_judge(), true);
  lenient.start("127.0.0.1", 0);
  const HttpVerifier norm(client_config(lenient.base_url()));
  CHECK(norm.equal(" 7 ", "7"));
  CHECK(norm.equal("7", "7"));
  CHECK_FALSE(norm.equal("8", "7"));

  JudgeServer strict(desk_judge(), false);
  strict.start("127.0.0.1", 0);
  const HttpVerifier exact(client_config(strict.base_url()));
  CHECK_FALSE(exact.equal(" 7 ", "7"));
  CHECK(exact.equal("7", "7"));
}

TEST_CASE("malformed requests are answered with 400 and an error body") {
  JudgeServer server(desk_judge());
  server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", server.port());

  auto post = [&](const char* path, const std::string& body) {
    auto res = client.Post(path, body, "application/json");
    REQUIRE(res);
    return std::pair<int, std::string>(res->status, res->body);
  };

  for (const char* body : {"not json", R"({"prompt": 3, "response": "x"})",
                           R"({"prompt": "x"})", R"([1,2,3])"}) {
    const auto [status, reply] = post("/score", body);
    CHECK(status == 400);
    CHECK(reply.find("error") != std::string::npos);
  }
  for (const char* body :
       {"{", R"({"answer": "7"})", R"({"answer": "7", "reference": 7})"}) {
    const auto [status, reply] = post("/verify", body);
    CHECK(status == 400);
    CHECK(reply.find("error") != std::string::npos);
  }

  // Well-formed requests still succeed on the same connection.
  const auto [status, reply] = post("/score", R"({"prompt":"p","response":"r"})");
  CHECK(status == 200);
  CHECK(nlohmann::json::parse(reply).contains("score"));
}

TEST_CASE("client surfaces malformed replies as JudgeMalformed") {
  ScriptedServer server;
  const HttpJudge judge(client_config(server.url(), 0));

  for (int script : {ScriptedServer::kBodyNotJson, ScriptedServer::kScoreString,
                     ScriptedServer::kScoreMissing, ScriptedServer::kScoreOverflow}) {
    server.set_body(script);
    CHECK_THROWS_AS(judge.score("p", "r"), JudgeMalformed);
  }

  server.set_body(ScriptedServer::kScoreOk);
  CHECK(judge.score("p", "r") == 1.5);

  // The verifier folds every failure into VerifierUnavailable.
  const HttpVerifier verifier(client_config(server.url(), 0));
  server.set_body(ScriptedServer::kScoreMissing);
  CHECK_THROWS_AS(verifier.equal("a", "b"), VerifierUnavailable);
}

TEST_CASE("client retries transient failures then gives up") {
  ScriptedServer server;
  server.set_body(ScriptedServer::kScoreOk);

  // Two 500s, then success: three attempts fit inside retries = 2.
  server.fail_first(2);
  const HttpJudge judge(client_config(server.url(), 2));
  CHECK(judge.score("p", "r") == 1.5);
  CHECK(server.hits() == 3);

  // Fresh failure budget larger than the retry allowance: unavailability.
  server.reset_hits();
  server.fail_first(100);
  const HttpJudge strict(client_config(server.url(), 1));
  CHECK_THROWS_AS(strict.score("p", "r"), JudgeUnavailable);
  CHECK(server.hits() == 2);
}

TEST_CASE("clients report dead endpoints as unavailable") {
  // Nothing listens on port 9 of localhost; connections fail immediately.
  HttpBackendConfig cfg = client_config("http://127.0.0.1:9", 0);
  cfg.timeout_ms = 300;
  CHECK_THROWS_AS(HttpJudge(cfg).score("p", "r"), JudgeUnavailable);
  CHECK_THROWS_AS(HttpVerifier(cfg).equal("a", "b"), VerifierUnavailable);
}

TEST_CASE("http backend config validation") {
  CHECK_THROWS_AS(HttpJudge(HttpBackendConfig{}), ConfigError);
  HttpBackendConfig cfg = client_config("http://127.0.0.1:1");
  cfg.timeout_ms = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = client_config("http://127.0.0.1:1");
  cfg.retries = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("http backends reproduce the mock training run byte for byte") {
  TrainConfig base = TrainConfig::desk_profile();
  base.batch_size = 4;
  base.group_size = 4;
  base.curriculum = {{0, 16}};
  base.base_policy.sample_count = 32;
  base.base_policy.fit_steps = 30;
  base.eval_every = 0;
  base.max_steps = 3;

  JudgeServer server(base.judge, base.verifier_normalize_ws);
  server.start("127.0.0.1", 0);

  TrainConfig remote = base;
  remote.judge_backend = JudgeBackend::http;
  remote.judge_url = server.base_url();
  remote.verifier_backend = VerifierBackend::http;
  remote.verifier_url = server.base_url();

  Trainer local_run(base);
  Trainer remote_run(remote);
  for (int i = 0; i < 3; ++i) {
    StepReport a = local_run.train_step();
    StepReport b = remote_run.train_step();
    // The config hashes differ (the backend fields differ); every training
    // quantity must not.
    a.config_hash.clear();
    b.config_hash.clear();
    CHECK(step_report_to_line(a) == step_report_to_line(b));
  }
}
