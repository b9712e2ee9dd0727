#pragma once

#include <memory>
#include <string>

#include "zrl/mock_judge.hpp"

namespace zrl {

/// In-process HTTP server exposing the mock judge on POST /score and an
/// exact-match verifier on POST /verify. Used by the serve-judge CLI verb
/// and by integration tests (port 0 picks a free port).
class JudgeServer {
 public:
  explicit JudgeServer(const MockJudgeConfig& judge_cfg,
                       bool normalize_whitespace = true);
  ~JudgeServer();

  JudgeServer(const JudgeServer&) = delete;
  JudgeServer& operator=(const JudgeServer&) = delete;

  /// Binds and serves on a background thread; returns once the server
  /// accepts connections. Throws JudgeUnavailable if binding fails.
  void start(const std::string& host, int port);

  /// Blocks and serves on the calling thread (CLI mode). Throws
  /// JudgeUnavailable if binding fails.
  void serve_forever(const std::string& host, int port);

  void stop();

  int port() const;
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zrl
