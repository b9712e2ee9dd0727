#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zrl/vocab.hpp"

namespace zrl {

enum class AdvantageMode { standardized, centered_only };

std::string_view to_string(AdvantageMode mode);
AdvantageMode advantage_mode_from_string(std::string_view s);

struct ClipConfig {
  double epsilon = 0.2;
  AdvantageMode advantage_mode = AdvantageMode::standardized;
  double std_floor = 1e-6;

  void validate() const;  ///< throws ConfigError
};

/// One prompt's worth of sampled responses with everything the objective
/// needs. old_logprobs[i][t] is log pi_old(o_{i,t} | q, o_{i,<t}); advantages
/// holds one A_i per response, broadcast over its tokens.
struct RolloutGroup {
  std::string prompt_id;
  std::vector<Token> prompt;
  std::vector<std::vector<Token>> responses;
  std::vector<std::vector<double>> old_logprobs;
  std::vector<double> rewards;
  std::vector<double> advantages;

  std::size_t size() const { return responses.size(); }
  std::size_t total_tokens() const;
  /// Enforces the shape invariants (G >= 2, aligned lengths, no empty
  /// response). Throws ShapeMismatch or PreconditionViolated.
  void check() const;
};

/// Group-relative advantages. standardized: (r - mean)/(population_std +
/// std_floor); centered_only: r - mean. A group with zero reward spread
/// yields exactly zero advantages in both modes.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       AdvantageMode mode, double std_floor);

/// Interface the objective gradient needs from a policy: per-token logprobs
/// of a fixed response under the current parameters, and weighted
/// score-function gradients accumulated into a flat parameter vector.
class ScoredPolicy {
 public:
  virtual ~ScoredPolicy() = default;
  virtual std::size_t param_count() const = 0;
  /// out[t] = log pi(response[t] | prompt, response[..t)); out.size() must
  /// equal response.size().
  virtual void response_logprobs(std::span<const Token> prompt,
                                 std::span<const Token> response,
                                 std::span<double> out) const = 0;
  /// grad += sum_t weights[t] * d log pi(response[t] | ...) / d theta.
  virtual void add_weighted_score_gradients(std::span<const Token> prompt,
                                            std::span<const Token> response,
                                            std::span<const double> weights,
                                            std::span<double> grad) const = 0;
};

/// Per-response new logprobs for one group, aligned with old_logprobs.
using TokenLogprobs = std::vector<std::vector<double>>;

/// Evaluates every group's responses under `policy`; convenience for the
/// objective and its tests.
std::vector<TokenLogprobs> collect_logprobs(std::span<const RolloutGroup> groups,
                                            const ScoredPolicy& policy);

/// Clipped surrogate objective: per group, sum_i sum_t min(r A_i,
/// clip(r, 1-eps, 1+eps) A_i) with r = exp(new - old), divided by that
/// group's token count; groups are then averaged uniformly. No KL term of
/// any kind: the signature admits no reference policy.
double token_objective(std::span<const RolloutGroup> groups,
                       std::span<const TokenLogprobs> new_logprobs,
                       const ClipConfig& clip);

/// Gradient of token_objective with respect to the policy parameters,
/// evaluated at the parameters behind `policy` (which also define the "new"
/// logprobs). A token whose clipped branch is strictly active contributes
/// zero; ties fall to the unclipped branch. `workers` > 1 distributes groups
/// across threads; the reduction order is fixed, so results are identical
/// for any worker count.
std::vector<double> objective_gradient(std::span<const RolloutGroup> groups,
                                       const ScoredPolicy& policy,
                                       const ClipConfig& clip,
                                       unsigned workers = 1);

}  // namespace zrl
