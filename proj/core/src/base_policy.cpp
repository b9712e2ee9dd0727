#include "zrl/base_policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "zrl/errors.hpp"
#include "zrl/optim.hpp"
#include "zrl/rng.hpp"

namespace zrl {

void BasePolicyRecipe::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError("base_policy: " + what); };
  if (sample_count < 1) bad("sample_count must be >= 1");
  if (fit_steps < 0) bad("fit_steps must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    bad("learning_rate must be a positive real");
  }
  if (!(init_scale >= 0.0)) bad("init_scale must be >= 0");
  if (think_min < 0 || think_max < think_min) bad("think span bounds are inverted");
  if (answer_min < 0 || answer_max < answer_min) bad("answer span bounds are inverted");
  if (prompt_min < 1 || prompt_max < prompt_min) bad("prompt length bounds are inverted");
  if (!(arithmetic_prompt_fraction >= 0.0 && arithmetic_prompt_fraction <= 1.0)) {
    bad("arithmetic_prompt_fraction must lie in [0, 1]");
  }
}

namespace {

std::string pool_from_range(const Vocab& vocab, char lo, char hi) {
  std::string out;
  for (char c = lo; c <= hi; ++c) {
    if (vocab.contains_char(c)) out.push_back(c);
  }
  return out;
}

char pick(const std::string& pool, Stream& stream) {
  return pool[stream.next_below(pool.size())];
}

int pick_len(int lo, int hi, Stream& stream) {
  return lo + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(hi - lo) + 1));
}

}  // namespace

MlpPolicy make_base_policy(const Vocab& vocab, int context_window, int embed_dim,
                           int hidden_dim, std::uint64_t seed,
                           const BasePolicyRecipe& recipe) {
  recipe.validate();
  const std::string letters = pool_from_range(vocab, 'a', 'z');
  const std::string digits = pool_from_range(vocab, '0', '9');
  std::string ops;
  for (char c : {'+', '*'}) {
    if (vocab.contains_char(c)) ops.push_back(c);
  }
  if (letters.empty() || digits.empty()) {
    throw ConfigError("base_policy: vocabulary must contain letters and digits");
  }

  MlpPolicy policy(vocab.size(), context_window, embed_dim, hidden_dim);
  Stream root(seed, fnv1a64("base-policy"));
  Stream init = root.substream({1});
  policy.randomize(init, recipe.init_scale);

  struct Example {
    std::vector<Token> prompt;
    std::vector<Token> response;
  };
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(recipe.sample_count));
  std::size_t total_tokens = 0;
  Stream gen = root.substream({2});
  for (int i = 0; i < recipe.sample_count; ++i) {
    Stream ex = gen.substream({static_cast<std::uint64_t>(i)});

    std::string prompt;
    if (!ops.empty() && ex.next_double() < recipe.arithmetic_prompt_fraction) {
      // Question-shaped operand chains. The paired answers below stay random
      // digits, so no arithmetic is taught here, only what questions look
      // like.
      const int terms = 2 + static_cast<int>(ex.next_below(2));
      for (int t = 0; t < terms; ++t) {
        if (t > 0) prompt.push_back(pick(ops, ex));
        prompt.push_back(pick(digits, ex));
      }
      if (vocab.contains_char('=')) prompt.push_back('=');
      if (vocab.contains_char('?')) prompt.push_back('?');
    } else {
      const int len = pick_len(recipe.prompt_min, recipe.prompt_max, ex);
      for (int t = 0; t < len; ++t) {
        const bool space_ok = vocab.contains_char(' ') && t > 0 && t + 1 < len &&
                              prompt.back() != ' ';
        if (space_ok && ex.next_double() < 0.2) {
          prompt.push_back(' ');
        } else {
          prompt.push_back(pick(letters, ex));
        }
      }
      if (vocab.contains_char('?')) prompt.push_back('?');
    }

    std::string resp(kThinkOpen);
    const int think_len = pick_len(recipe.think_min, recipe.think_max, ex);
    for (int t = 0; t < think_len; ++t) resp.push_back(pick(letters, ex));
    resp.append(kThinkClose);
    resp.append(kAnswerOpen);
    const int answer_len = pick_len(recipe.answer_min, recipe.answer_max, ex);
    for (int t = 0; t < answer_len; ++t) resp.push_back(pick(digits, ex));
    resp.append(kAnswerClose);

    Example e;
    e.prompt = vocab.encode(prompt);
    e.response = vocab.encode(resp);
    e.response.push_back(Vocab::kEos);
    total_tokens += e.response.size();
    examples.push_back(std::move(e));
  }

  // Full-batch MLE on mean token logprob; fixed iteration order keeps the
  // whole construction deterministic.
  OptimizerConfig opt_cfg;
  opt_cfg.kind = OptimizerKind::adam;
  opt_cfg.learning_rate = recipe.learning_rate;
  Optimizer opt(opt_cfg, policy.param_count());
  const double w = 1.0 / static_cast<double>(total_tokens);
  std::vector<double> grad(policy.param_count());
  std::vector<double> weights;
  for (int step = 0; step < recipe.fit_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const Example& e : examples) {
      weights.assign(e.response.size(), w);
      policy.add_weighted_score_gradients(e.prompt, e.response, weights, grad);
    }
    opt.ascend(policy.mutable_params(), grad);
  }
  return policy;
}

}  // namespace zrl
