#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "zrl/errors.hpp"
#include "zrl/policy.hpp"
#include "zrl/rng.hpp"
#include "zrl/vocab.hpp"

using namespace zrl;

namespace {

void fill_gaussian(Policy& policy, Stream& stream, double scale) {
  for (double& p : policy.mutable_params()) p = scale * stream.next_gaussian();
}

std::vector<double> probs_of(const Policy& policy, std::span<const Token> prefix) {
  std::vector<double> lg(static_cast<std::size_t>(policy.vocab_size()));
  policy.logits(prefix, lg);
  std::vector<double> p(lg.size());
  softmax(lg, p);
  return p;
}

}  // namespace

TEST_CASE("log_sum_exp matches the naive formula and survives large inputs") {
  const std::vector<double> v = {0.1, -2.0, 3.5, 1.0};
  double naive = 0.0;
  for (double x : v) naive += std::exp(x);
  CHECK(log_sum_exp(v) == doctest::Approx(std::log(naive)).epsilon(1e-12));

  // Values that would overflow exp directly.
  const std::vector<double> big = {1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax normalizes and matches exp(logit - lse)") {
  Stream s(10, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> lg(7);
    for (auto& v : lg) v = -4.0 + 8.0 * s.next_double();
    std::vector<double> p(7);
    softmax(lg, p);
    double sum = 0.0;
    const double lse = log_sum_exp(lg);
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum += p[i];
      CHECK(p[i] == doctest::Approx(std::exp(lg[i] - lse)).epsilon(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("next_logprobs is a normalized distribution") {
  Stream s(11, 0);
  TabularPolicy policy(6, 1);
  fill_gaussian(policy, s, 1.0);
  std::vector<double> lp(6);
  const std::vector<Token> prefix = {2};
  policy.next_logprobs(prefix, lp);
  double mass = 0.0;
  for (double v : lp) mass += std::exp(v);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tabular policy rows depend on exactly the last `order` tokens") {
  TabularPolicy policy(5, 2);
  Stream s(12, 0);
  fill_gaussian(policy, s, 1.0);

  std::vector<double> a(5), b(5), c(5);
  const std::vector<Token> p1 = {0, 1, 3, 4};
  const std::vector<Token> p2 = {2, 2, 3, 4};  // same last two tokens
  const std::vector<Token> p3 = {0, 1, 2, 4};  // different second-to-last
  policy.logits(p1, a);
  policy.logits(p2, b);
  policy.logits(p3, c);
  CHECK(a == b);
  CHECK(a != c);

  // Short prefixes pad with a dedicated id, distinct from any real token.
  std::vector<double> empty1(5), empty2(5);
  policy.logits(std::vector<Token>{}, empty1);
  policy.logits(std::vector<Token>{0}, empty2);
  CHECK(empty1 != empty2);
}

TEST_CASE("tabular policy parameter count is rows times vocab") {
  CHECK(TabularPolicy(5, 1).param_count() == 6u * 5u);
  CHECK(TabularPolicy(5, 2).param_count() == 36u * 5u);
  CHECK(TabularPolicy(3, 3).param_count() == 64u * 3u);
}

TEST_CASE("mlp with zero parameters is uniform") {
  MlpPolicy policy(6, 3, 2, 3);
  std::vector<double> lp(6);
  policy.next_logprobs(std::vector<Token>{1, 2}, lp);
  for (double v : lp) CHECK(v == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-12));
}

TEST_CASE("mlp context window: only the trailing tokens matter") {
  MlpPolicy policy(6, 2, 2, 3);
  Stream s(13, 0);
  policy.randomize(s, 0.5);
  std::vector<double> a(6), b(6);
  policy.logits(std::vector<Token>{5, 1, 2, 3}, a);
  policy.logits(std::vector<Token>{4, 4, 2, 3}, b);
  CHECK(a == b);
  policy.logits(std::vector<Token>{2, 2}, a);
  policy.logits(std::vector<Token>{3, 2}, b);
  CHECK(a != b);
}

TEST_CASE("response_logprobs equals the chain of next-token logprobs") {
  Stream s(14, 0);
  MlpPolicy policy(6, 3, 2, 3);
  policy.randomize(s, 0.5);
  const std::vector<Token> prompt = {1, 2};
  const std::vector<Token> response = {3, 5, 0};
  std::vector<double> out(3);
  policy.response_logprobs(prompt, response, out);

  std::vector<Token> prefix = prompt;
  for (std::size_t t = 0; t < response.size(); ++t) {
    std::vector<double> lp(6);
    policy.next_logprobs(prefix, lp);
    CHECK(out[t] == doctest::Approx(lp[static_cast<std::size_t>(response[t])])
                        .epsilon(1e-12));
    prefix.push_back(response[t]);
  }
}

TEST_CASE("response_logprobs rejects out-of-vocabulary tokens") {
  TabularPolicy policy(5, 1);
  std::vector<double> out(1);
  const std::vector<Token> prompt = {1};
  CHECK_THROWS_AS(policy.response_logprobs(prompt, std::vector<Token>{7}, out),
                  UnknownToken);
  CHECK_THROWS_AS(policy.response_logprobs(prompt, std::vector<Token>{-1}, out),
                  UnknownToken);
  std::vector<double> wrong(2);
  CHECK_THROWS_AS(policy.response_logprobs(prompt, std::vector<Token>{1}, wrong),
                  ShapeMismatch);
}

TEST_CASE("sampling is deterministic in the stream and consistent with scoring") {
  Stream init(15, 0);
  TabularPolicy policy(6, 1);
  fill_gaussian(policy, init, 0.8);
  SamplingParams sampling;
  sampling.max_new_tokens = 10;

  Stream s1(21, 5), s2(21, 5);
  const Rollout a = policy.sample(std::vector<Token>{1}, sampling, s1);
  const Rollout b = policy.sample(std::vector<Token>{1}, sampling, s2);
  CHECK(a.tokens == b.tokens);
  CHECK(a.logprobs == b.logprobs);
  REQUIRE(!a.tokens.empty());
  CHECK(a.tokens.size() <= 10);
  if (a.ends_with_eos) CHECK(a.tokens.back() == Vocab::kEos);

  // Recorded logprobs are the untruncated temperature-1 values, which is
  // exactly what response_logprobs computes.
  std::vector<double> rescored(a.tokens.size());
  policy.response_logprobs(std::vector<Token>{1}, a.tokens, rescored);
  CHECK(a.logprobs == rescored);
}

TEST_CASE("sampling stops at end-of-sequence") {
  // A policy hugely biased toward eos emits exactly one token.
  TabularPolicy policy(6, 1);
  auto params = policy.mutable_params();
  // Raise the eos logit in every row.
  for (std::size_t row = 0; row < params.size() / 6; ++row) params[row * 6] = 25.0;
  SamplingParams sampling;
  sampling.max_new_tokens = 10;
  Stream s(16, 0);
  const Rollout r = policy.sample(std::vector<Token>{1}, sampling, s);
  CHECK(r.tokens == std::vector<Token>{Vocab::kEos});
  CHECK(r.ends_with_eos);
}

TEST_CASE("greedy sampling picks the argmax at every position") {
  Stream init(17, 0);
  MlpPolicy policy(6, 3, 2, 4);
  policy.randomize(init, 0.8);
  SamplingParams sampling;
  sampling.greedy = true;
  sampling.max_new_tokens = 8;
  Stream s(18, 0);
  const std::vector<Token> prompt = {1, 4};
  const Rollout r = policy.sample(prompt, sampling, s);

  std::vector<Token> prefix = prompt;
  for (Token tok : r.tokens) {
    std::vector<double> lg(6);
    policy.logits(prefix, lg);
    const auto arg = static_cast<Token>(
        std::max_element(lg.begin(), lg.end()) - lg.begin());
    CHECK(tok == arg);
    prefix.push_back(tok);
  }

  // Greedy ignores the stream entirely: a different stream gives the same
  // rollout.
  Stream other(99, 7);
  const Rollout r2 = policy.sample(prompt, sampling, other);
  CHECK(r2.tokens == r.tokens);
}

TEST_CASE("top_p truncation never samples outside the nucleus") {
  // Hand-built distribution: probabilities 0.6, 0.3, 0.1 over three tokens
  // (via a single tabular row). With top_p = 0.5 only the head survives;
  // with top_p = 0.7 the second token joins.
  TabularPolicy policy(3, 1);
  auto params = policy.mutable_params();
  const double p0 = 0.6, p1 = 0.3, p2 = 0.1;
  for (std::size_t row = 0; row < params.size() / 3; ++row) {
    params[row * 3 + 0] = std::log(p0);
    params[row * 3 + 1] = std::log(p1);
    params[row * 3 + 2] = std::log(p2);
  }
  SamplingParams sampling;
  sampling.max_new_tokens = 1;
  Stream s(19, 0);

  sampling.top_p = 0.5;
  for (int i = 0; i < 300; ++i) {
    const Rollout r = policy.sample(std::vector<Token>{1}, sampling, s);
    CHECK(r.tokens[0] == 0);
  }

  sampling.top_p = 0.7;
  std::set<Token> seen;
  for (int i = 0; i < 300; ++i) {
    const Rollout r = policy.sample(std::vector<Token>{1}, sampling, s);
    seen.insert(r.tokens[0]);
    CHECK(r.tokens[0] != 2);
  }
  CHECK(seen == std::set<Token>{0, 1});

  // top_p = 1 keeps the tail reachable.
  sampling.top_p = 1.0;
  seen.clear();
  for (int i = 0; i < 2000; ++i) {
    const Rollout r = policy.sample(std::vector<Token>{1}, sampling, s);
    seen.insert(r.tokens[0]);
  }
  CHECK(seen.count(2) == 1);
}

TEST_CASE("temperature reshapes the sampling distribution but not the scores") {
  TabularPolicy policy(3, 1);
  auto params = policy.mutable_params();
  for (std::size_t row = 0; row < params.size() / 3; ++row) {
    params[row * 3 + 0] = 1.0;
    params[row * 3 + 1] = 0.0;
    params[row * 3 + 2] = -1.0;
  }
  SamplingParams cold;
  cold.temperature = 0.05;
  cold.max_new_tokens = 1;
  Stream s(20, 0);
  int head = 0;
  Rollout last;
  for (int i = 0; i < 200; ++i) {
    last = policy.sample(std::vector<Token>{1}, cold, s);
    if (last.tokens[0] == 0) ++head;
  }
  CHECK(head == 200);  // essentially deterministic at this temperature

  // The recorded logprob is still the temperature-1 value.
  std::vector<double> rescored(1);
  policy.response_logprobs(std::vector<Token>{1}, last.tokens, rescored);
  CHECK(last.logprobs[0] == rescored[0]);
}

TEST_CASE("sampling parameter validation") {
  // There is no default budget; every caller must pick a window.
  SamplingParams base;
  CHECK_THROWS_AS(base.validate(), ConfigError);
  base.max_new_tokens = 4;
  CHECK_NOTHROW(base.validate());

  SamplingParams p = base;
  p.temperature = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = base;
  p.top_p = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = base;
  p.top_p = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  // Greedy decoding does not need a temperature.
  p = base;
  p.greedy = true;
  p.temperature = 0.0;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("score_gradient matches finite differences") {
  Stream s(21, 0);
  for (const bool use_mlp : {false, true}) {
    std::unique_ptr<Policy> policy;
    if (use_mlp) {
      policy = std::make_unique<MlpPolicy>(5, 2, 2, 3);
    } else {
      policy = std::make_unique<TabularPolicy>(5, 2);
    }
    fill_gaussian(*policy, s, 0.5);
    const std::vector<Token> prefix = {1, 3};
    const Token target = 2;
    const auto grad = policy->score_gradient(prefix, target);

    auto params = policy->mutable_params();
    const double h = 1e-6;
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double saved = params[p];
      std::vector<double> lp(5);
      params[p] = saved + h;
      policy->next_logprobs(prefix, lp);
      const double up = lp[2];
      params[p] = saved - h;
      policy->next_logprobs(prefix, lp);
      const double down = lp[2];
      params[p] = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(grad[p] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("expected score gradient over the vocabulary is zero") {
  // sum_t p(t) d log p(t) / d theta = d sum_t p(t) / d theta = 0. This holds
  // for any softmax policy and catches backprop sign errors immediately.
  Stream s(22, 0);
  MlpPolicy policy(5, 2, 2, 3);
  policy.randomize(s, 0.6);
  const std::vector<Token> prefix = {4, 1};
  const auto probs = probs_of(policy, prefix);

  std::vector<double> acc(policy.param_count(), 0.0);
  for (Token t = 0; t < 5; ++t) {
    const auto g = policy.score_gradient(prefix, t);
    for (std::size_t p = 0; p < acc.size(); ++p) {
      acc[p] += probs[static_cast<std::size_t>(t)] * g[p];
    }
  }
  for (double v : acc) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("add_weighted_score_gradients is the weighted sum of per-token gradients") {
  Stream s(23, 0);
  TabularPolicy policy(5, 1);
  fill_gaussian(policy, s, 0.5);
  const std::vector<Token> prompt = {2};
  const std::vector<Token> response = {1, 4, 0};
  const std::vector<double> weights = {0.5, -1.25, 2.0};

  std::vector<double> combined(policy.param_count(), 0.0);
  policy.add_weighted_score_gradients(prompt, response, weights, combined);

  std::vector<double> manual(policy.param_count(), 0.0);
  std::vector<Token> prefix = prompt;
  for (std::size_t t = 0; t < response.size(); ++t) {
    const auto g = policy.score_gradient(prefix, response[t]);
    for (std::size_t p = 0; p < manual.size(); ++p) manual[p] += weights[t] * g[p];
    prefix.push_back(response[t]);
  }
  for (std::size_t p = 0; p < manual.size(); ++p) {
    CHECK(combined[p] == doctest::Approx(manual[p]).epsilon(1e-12));
  }
}

TEST_CASE("clone yields an independent copy") {
  Stream s(24, 0);
  MlpPolicy policy(5, 2, 2, 3);
  policy.randomize(s, 0.5);
  const auto copy = policy.clone();
  CHECK(std::equal(copy->params().begin(), copy->params().end(),
                   policy.params().begin()));
  policy.mutable_params()[0] += 1.0;
  CHECK(copy->params()[0] != policy.params()[0]);
}

TEST_CASE("policy json round-trip preserves every parameter bit") {
  Stream s(25, 0);
  MlpPolicy mlp(6, 3, 2, 3);
  mlp.randomize(s, 0.7);
  const std::string blob = policy_to_json(mlp);
  const auto back = policy_from_json(blob);
  REQUIRE(back->kind() == PolicyKind::mlp);
  CHECK(back->vocab_size() == 6);
  REQUIRE(back->params().size() == mlp.params().size());
  for (std::size_t p = 0; p < mlp.params().size(); ++p) {
    CHECK(back->params()[p] == mlp.params()[p]);
  }

  TabularPolicy tab(4, 2);
  fill_gaussian(tab, s, 0.7);
  const auto tab_back = policy_from_json(policy_to_json(tab));
  REQUIRE(tab_back->kind() == PolicyKind::tabular_ngram);
  CHECK(std::equal(tab_back->params().begin(), tab_back->params().end(),
                   tab.params().begin()));
}

TEST_CASE("policy json rejects malformed input") {
  CHECK_THROWS_AS(policy_from_json("not json"), CheckpointError);
  CHECK_THROWS_AS(policy_from_json("{}"), CheckpointError);
  CHECK_THROWS_AS(policy_from_json(R"({"format":"zrl-policy-v1","kind":"spline"})"),
                  CheckpointError);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(TabularPolicy(1, 1), ConfigError);
  CHECK_THROWS_AS(TabularPolicy(5, 0), ConfigError);
  CHECK_THROWS_AS(TabularPolicy(5, 5), ConfigError);
  CHECK_THROWS_AS(MlpPolicy(1, 2, 2, 2), ConfigError);
  CHECK_THROWS_AS(MlpPolicy(5, 0, 2, 2), ConfigError);
  CHECK_THROWS_AS(MlpPolicy(5, 2, 0, 2), ConfigError);
  CHECK_THROWS_AS(MlpPolicy(5, 2, 2, 0), ConfigError);
}
