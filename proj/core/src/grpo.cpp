#include "zrl/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "zrl/errors.hpp"
#include "zrl/parallel.hpp"

namespace zrl {

std::string_view to_string(AdvantageMode mode) {
  return mode == AdvantageMode::standardized ? "standardized" : "centered_only";
}

AdvantageMode advantage_mode_from_string(std::string_view s) {
  if (s == "standardized") return AdvantageMode::standardized;
  if (s == "centered_only") return AdvantageMode::centered_only;
  throw ConfigError("unknown advantage mode: " + std::string(s));
}

void ClipConfig::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw ConfigError("clip: epsilon must lie in (0, 1)");
  }
  if (!(std_floor > 0.0) || !std::isfinite(std_floor)) {
    throw ConfigError("clip: std_floor must be a positive real");
  }
}

std::size_t RolloutGroup::total_tokens() const {
  std::size_t n = 0;
  for (const auto& r : responses) n += r.size();
  return n;
}

void RolloutGroup::check() const {
  const std::size_t g = responses.size();
  if (g < 2) throw PreconditionViolated("rollout group needs G >= 2 responses");
  if (old_logprobs.size() != g || rewards.size() != g || advantages.size() != g) {
    throw ShapeMismatch("rollout group arrays disagree on G");
  }
  for (std::size_t i = 0; i < g; ++i) {
    if (responses[i].empty()) {
      throw PreconditionViolated("rollout group contains an empty response");
    }
    if (old_logprobs[i].size() != responses[i].size()) {
      throw ShapeMismatch("old_logprobs misaligned with response tokens");
    }
  }
}

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       AdvantageMode mode, double std_floor) {
  const std::size_t g = rewards.size();
  if (g < 2) throw PreconditionViolated("advantages need G >= 2 rewards");

  bool all_equal = true;
  for (std::size_t i = 1; i < g; ++i) {
    if (rewards[i] != rewards[0]) {
      all_equal = false;
      break;
    }
  }
  if (all_equal) return std::vector<double>(g, 0.0);

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  std::vector<double> out(g);
  for (std::size_t i = 0; i < g; ++i) out[i] = rewards[i] - mean;
  if (mode == AdvantageMode::centered_only) return out;

  double var = 0.0;
  for (double d : out) var += d * d;
  var /= static_cast<double>(g);
  const double denom = std::sqrt(var) + std_floor;
  for (double& d : out) d /= denom;
  return out;
}

std::vector<TokenLogprobs> collect_logprobs(std::span<const RolloutGroup> groups,
                                            const ScoredPolicy& policy) {
  std::vector<TokenLogprobs> out(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    out[gi].resize(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      out[gi][i].resize(group.responses[i].size());
      policy.response_logprobs(group.prompt, group.responses[i], out[gi][i]);
    }
  }
  return out;
}

namespace {

double ratio_or_throw(double new_lp, double old_lp) {
  const double r = std::exp(new_lp - old_lp);
  if (!std::isfinite(r)) throw NonFinite("importance ratio overflowed");
  return r;
}

/// min(r*A, clip(r)*A) and whether the unclipped branch is active (ties
/// count as unclipped, so its gradient survives at the boundary).
struct BranchEval {
  double value;
  bool unclipped_active;
};

BranchEval eval_branches(double r, double a, double eps) {
  const double unclipped = r * a;
  const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps) * a;
  if (unclipped <= clipped) return {unclipped, true};
  return {clipped, false};
}

double group_objective(const RolloutGroup& group, const TokenLogprobs& new_lp,
                       double eps) {
  if (new_lp.size() != group.size()) {
    throw ShapeMismatch("new_logprobs group width mismatch");
  }
  double sum = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (new_lp[i].size() != group.old_logprobs[i].size()) {
      throw ShapeMismatch("new_logprobs token count mismatch");
    }
    const double a = group.advantages[i];
    for (std::size_t t = 0; t < new_lp[i].size(); ++t) {
      const double r = ratio_or_throw(new_lp[i][t], group.old_logprobs[i][t]);
      sum += eval_branches(r, a, eps).value;
    }
    tokens += new_lp[i].size();
  }
  if (tokens == 0) throw PreconditionViolated("group has no tokens");
  return sum / static_cast<double>(tokens);
}

}  // namespace

double token_objective(std::span<const RolloutGroup> groups,
                       std::span<const TokenLogprobs> new_logprobs,
                       const ClipConfig& clip) {
  clip.validate();
  if (groups.empty()) throw PreconditionViolated("empty batch");
  if (new_logprobs.size() != groups.size()) {
    throw ShapeMismatch("new_logprobs batch width mismatch");
  }
  double total = 0.0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    groups[gi].check();
    total += group_objective(groups[gi], new_logprobs[gi], clip.epsilon);
  }
  return total / static_cast<double>(groups.size());
}

std::vector<double> objective_gradient(std::span<const RolloutGroup> groups,
                                       const ScoredPolicy& policy,
                                       const ClipConfig& clip, unsigned workers) {
  clip.validate();
  if (groups.empty()) throw PreconditionViolated("empty batch");
  const std::size_t n_params = policy.param_count();
  const double batch_scale = 1.0 / static_cast<double>(groups.size());

  // Each group's contribution lands in its own slot; the sum below walks the
  // slots in index order so the result is bit-identical for any worker count.
  std::vector<std::vector<double>> partial(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t gi) {
    const auto& group = groups[gi];
    group.check();
    auto& grad = partial[gi];
    grad.assign(n_params, 0.0);
    const double token_scale =
        batch_scale / static_cast<double>(group.total_tokens());
    std::vector<double> new_lp;
    std::vector<double> weights;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& response = group.responses[i];
      new_lp.resize(response.size());
      policy.response_logprobs(group.prompt, response, new_lp);
      const double a = group.advantages[i];
      weights.assign(response.size(), 0.0);
      bool any = false;
      for (std::size_t t = 0; t < response.size(); ++t) {
        const double r = ratio_or_throw(new_lp[t], group.old_logprobs[i][t]);
        if (eval_branches(r, a, clip.epsilon).unclipped_active && a != 0.0) {
          weights[t] = token_scale * a * r;
          any = true;
        }
      }
      if (any) {
        policy.add_weighted_score_gradients(group.prompt, response, weights, grad);
      }
    }
  });

  std::vector<double> grad(n_params, 0.0);
  for (const auto& part : partial) {
    for (std::size_t p = 0; p < n_params; ++p) grad[p] += part[p];
  }
  return grad;
}

}  // namespace zrl
