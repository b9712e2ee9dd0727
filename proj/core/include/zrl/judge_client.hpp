#pragma once

#include <memory>
#include <string>

#include "zrl/reward.hpp"

namespace zrl {

struct HttpBackendConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8791"
  int timeout_ms = 5000;
  int retries = 2;  // extra attempts after the first failure

  void validate() const;  ///< throws ConfigError
};

/// Remote judge speaking POST /score {"prompt","response"} -> {"score"}.
/// Transport failures and non-2xx statuses become JudgeUnavailable after
/// the configured retries; a 2xx body without a numeric score becomes
/// JudgeMalformed.
class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(HttpBackendConfig cfg);
  ~HttpJudge() override;

  double score(const std::string& prompt, const std::string& response) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Remote verifier speaking POST /verify {"answer","reference"} ->
/// {"equal"}. Any failure becomes VerifierUnavailable.
class HttpVerifier final : public Verifier {
 public:
  explicit HttpVerifier(HttpBackendConfig cfg);
  ~HttpVerifier() override;

  bool equal(const std::string& answer, const std::string& reference) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zrl
