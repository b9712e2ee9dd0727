#pragma once

#include <cstdint>

#include "zrl/policy.hpp"
#include "zrl/vocab.hpp"

namespace zrl {

/// Recipe for the deterministic base-policy construction. The resulting
/// policy knows the response skeleton (tags in order, filler text inside,
/// a stray digit or two in the answer) and nothing about any task: answer
/// digits are random, so verifier accuracy stays near chance.
struct BasePolicyRecipe {
  int sample_count = 256;   // skeleton examples in the fit set
  int fit_steps = 250;      // full-batch ascent steps
  double learning_rate = 0.03;
  double init_scale = 0.05;
  int think_min = 2;        // filler span token bounds
  int think_max = 5;
  int answer_min = 1;
  int answer_max = 2;
  int prompt_min = 4;       // synthetic prompt length bounds
  int prompt_max = 10;
  double arithmetic_prompt_fraction = 0.5;  // rest are word-like prompts

  void validate() const;  ///< throws ConfigError
};

/// Builds and fits an MLP of the given shape on skeleton text. Deterministic
/// in (vocab, shape, seed, recipe). This is the zero-RL starting point: raw
/// format competence with near-uniform answers, no supervised task data.
MlpPolicy make_base_policy(const Vocab& vocab, int context_window, int embed_dim,
                           int hidden_dim, std::uint64_t seed,
                           const BasePolicyRecipe& recipe);

}  // namespace zrl
