#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zrl/grpo.hpp"
#include "zrl/rng.hpp"
#include "zrl/vocab.hpp"

namespace zrl {

enum class PolicyKind { tabular_ngram, mlp };

std::string_view to_string(PolicyKind kind);

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_new_tokens = 0;
  bool greedy = false;  // temperature -> 0 limit; stream is not consumed

  void validate() const;  ///< throws ConfigError; max_new_tokens >= 1
};

struct Rollout {
  std::vector<Token> tokens;     // includes the terminating eos if one was emitted
  std::vector<double> logprobs;  // log pi at temperature 1, untruncated, per token
  bool ends_with_eos = false;
};

/// Autoregressive categorical policy over a fixed vocabulary with a flat
/// parameter vector. Positions before the sequence start are padded with an
/// internal pad id equal to vocab_size.
class Policy : public ScoredPolicy {
 public:
  virtual PolicyKind kind() const = 0;
  virtual int vocab_size() const = 0;
  virtual std::span<const double> params() const = 0;
  virtual std::span<double> mutable_params() = 0;

  /// Raw next-token logits given the full prefix; out.size() == vocab_size.
  /// Throws UnknownToken on out-of-vocabulary prefix tokens.
  virtual void logits(std::span<const Token> prefix, std::span<double> out) const = 0;

  /// Deep copy; the frozen pi_old snapshot. Later parameter writes on the
  /// original never affect the clone.
  virtual std::unique_ptr<Policy> clone() const = 0;

  /// log softmax(logits) at temperature 1.
  void next_logprobs(std::span<const Token> prefix, std::span<double> out) const;

  /// Temperature + nucleus sampling. Stops at eos or max_new_tokens.
  /// Recorded logprobs always come from the untruncated temperature-1
  /// distribution, so importance ratios stay well-defined under top_p < 1.
  Rollout sample(std::span<const Token> prompt, const SamplingParams& p,
                 Stream& stream) const;

  /// Full parameter-shaped gradient of log pi(target | prefix).
  std::vector<double> score_gradient(std::span<const Token> prefix, Token target) const;

  // ScoredPolicy: shared logprob evaluation on top of logits().
  void response_logprobs(std::span<const Token> prompt, std::span<const Token> response,
                         std::span<double> out) const override;
};

/// Lookup-table policy: one logit row per padded context of the last `order`
/// tokens, (vocab_size+1)^order rows of vocab_size logits, row-major.
class TabularPolicy : public Policy {
 public:
  TabularPolicy(int vocab_size, int order);

  PolicyKind kind() const override { return PolicyKind::tabular_ngram; }
  int vocab_size() const override { return vocab_; }
  int order() const { return order_; }
  std::span<const double> params() const override { return params_; }
  std::span<double> mutable_params() override { return params_; }
  std::size_t param_count() const override { return params_.size(); }
  void logits(std::span<const Token> prefix, std::span<double> out) const override;
  std::unique_ptr<Policy> clone() const override;
  void add_weighted_score_gradients(std::span<const Token> prompt,
                                    std::span<const Token> response,
                                    std::span<const double> weights,
                                    std::span<double> grad) const override;

  /// Row offset into the flat table for a given prefix; exposed for tests.
  std::size_t row_offset(std::span<const Token> prefix) const;

 private:
  int vocab_;
  int order_;
  std::vector<double> params_;
};

/// One-hidden-layer MLP: the last context_window tokens are embedded and
/// concatenated, pushed through tanh, then read out linearly. Parameter
/// layout, in order: embed[(V+1) x E], Wh[H x (W*E)], bh[H], Wo[V x H],
/// bo[V].
class MlpPolicy : public Policy {
 public:
  MlpPolicy(int vocab_size, int context_window, int embed_dim, int hidden_dim);

  PolicyKind kind() const override { return PolicyKind::mlp; }
  int vocab_size() const override { return vocab_; }
  int context_window() const { return window_; }
  int embed_dim() const { return embed_; }
  int hidden_dim() const { return hidden_; }
  std::span<const double> params() const override { return params_; }
  std::span<double> mutable_params() override { return params_; }
  std::size_t param_count() const override { return params_.size(); }
  void logits(std::span<const Token> prefix, std::span<double> out) const override;
  std::unique_ptr<Policy> clone() const override;
  void add_weighted_score_gradients(std::span<const Token> prompt,
                                    std::span<const Token> response,
                                    std::span<const double> weights,
                                    std::span<double> grad) const override;

  /// Small random init (deterministic in the stream); zero params would give
  /// exactly uniform outputs everywhere, which is sometimes what a test
  /// wants, so the constructor leaves them zero.
  void randomize(Stream& stream, double scale = 0.05);

 private:
  void context_ids(std::span<const Token> prefix, std::span<int> out) const;
  void forward(std::span<const int> ctx, std::span<double> hidden,
               std::span<double> out_logits) const;

  int vocab_;
  int window_;
  int embed_;
  int hidden_;
  std::vector<double> params_;
};

/// Versioned JSON checkpoint for either architecture; byte-stable for equal
/// state. Throws CheckpointError on malformed input.
std::string policy_to_json(const Policy& policy);
std::unique_ptr<Policy> policy_from_json(const std::string& text);

/// log sum exp over a logit vector, the softmax normalizer.
double log_sum_exp(std::span<const double> logits);

/// softmax into out (same size); numerically stable.
void softmax(std::span<const double> logits, std::span<double> out);

}  // namespace zrl
