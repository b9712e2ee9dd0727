#include "zrl/judge_client.hpp"

#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "zrl/errors.hpp"

namespace zrl {

void HttpBackendConfig::validate() const {
  if (base_url.empty()) throw ConfigError("http backend: base_url must be non-empty");
  if (timeout_ms < 1) throw ConfigError("http backend: timeout_ms must be >= 1");
  if (retries < 0) throw ConfigError("http backend: retries must be >= 0");
}

namespace {

/// One POST with a JSON body. Returns the response body on 2xx, nullopt on
/// transport errors or other statuses; retried by the caller.
std::optional<std::string> post_json(const HttpBackendConfig& cfg, const char* path,
                                     const std::string& body) {
  httplib::Client client(cfg.base_url);
  client.set_connection_timeout(0, cfg.timeout_ms * 1000);
  client.set_read_timeout(0, cfg.timeout_ms * 1000);
  client.set_write_timeout(0, cfg.timeout_ms * 1000);
  auto res = client.Post(path, body, "application/json");
  if (!res || res->status < 200 || res->status >= 300) return std::nullopt;
  return res->body;
}

std::optional<std::string> post_with_retries(const HttpBackendConfig& cfg, const char* path,
                                             const std::string& body) {
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (auto out = post_json(cfg, path, body)) return out;
  }
  return std::nullopt;
}

}  // namespace

struct HttpJudge::Impl {
  HttpBackendConfig cfg;
};

HttpJudge::HttpJudge(HttpBackendConfig cfg) : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  impl_->cfg = std::move(cfg);
}

HttpJudge::~HttpJudge() = default;

double HttpJudge::score(const std::string& prompt, const std::string& response) const {
  nlohmann::json body;
  body["prompt"] = prompt;
  body["response"] = response;
  const auto reply = post_with_retries(impl_->cfg, "/score", body.dump());
  if (!reply) {
    throw JudgeUnavailable("judge at " + impl_->cfg.base_url + " did not answer /score");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(*reply);
  } catch (const nlohmann::json::exception&) {
    throw JudgeMalformed("judge returned a non-JSON body");
  }
  if (!j.is_object() || !j.contains("score") || !j["score"].is_number()) {
    throw JudgeMalformed("judge reply is missing a numeric \"score\"");
  }
  const double score = j["score"].get<double>();
  if (!std::isfinite(score)) throw JudgeMalformed("judge returned a non-finite score");
  return score;
}

struct HttpVerifier::Impl {
  HttpBackendConfig cfg;
};

HttpVerifier::HttpVerifier(HttpBackendConfig cfg) : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  impl_->cfg = std::move(cfg);
}

HttpVerifier::~HttpVerifier() = default;

bool HttpVerifier::equal(const std::string& answer, const std::string& reference) const {
  nlohmann::json body;
  body["answer"] = answer;
  body["reference"] = reference;
  const auto reply = post_with_retries(impl_->cfg, "/verify", body.dump());
  if (!reply) {
    throw VerifierUnavailable("verifier at " + impl_->cfg.base_url + " did not answer /verify");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(*reply);
  } catch (const nlohmann::json::exception&) {
    throw VerifierUnavailable("verifier returned a non-JSON body");
  }
  if (!j.is_object() || !j.contains("equal") || !j["equal"].is_boolean()) {
    throw VerifierUnavailable("verifier reply is missing a boolean \"equal\"");
  }
  return j["equal"].get<bool>();
}

}  // namespace zrl
