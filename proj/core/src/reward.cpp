#include "zrl/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "zrl/errors.hpp"

namespace zrl {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::verifiable ? "verifiable" : "general";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "verifiable") return TaskKind::verifiable;
  if (s == "general") return TaskKind::general;
  throw SchemaError("unknown task kind: " + std::string(s));
}

void RewardCoefficients::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError("reward: " + what); };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) bad("alpha must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) bad("beta must be finite and >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
  if (l_cache <= 0) bad("l_cache must be positive");
  if (l_max <= l_cache) bad("l_max must exceed l_cache");
  if (l_min_prime < 0) bad("l_min_prime must be >= 0");
  if (l_max_prime <= l_min_prime) bad("l_max_prime must exceed l_min_prime");
}

namespace {

std::string normalize_ws(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = true;  // swallow leading whitespace
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(ch);
      in_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

bool ExactMatchVerifier::equal(const std::string& answer, const std::string& reference) const {
  if (!normalize_) return answer == reference;
  return normalize_ws(answer) == normalize_ws(reference);
}

double accuracy_verifiable(const std::optional<std::string>& answer_span,
                           const std::string& reference, const Verifier& verifier) {
  if (reference.empty()) throw PreconditionViolated("verifiable task with empty reference");
  if (!answer_span.has_value()) return -1.0;
  return verifier.equal(*answer_span, reference) ? 1.0 : -1.0;
}

double accuracy_judge(const std::string& prompt, const std::string& response,
                      const Judge& judge) {
  double raw = judge.score(prompt, response);
  if (!std::isfinite(raw)) throw JudgeMalformed("judge returned a non-finite score");
  return std::clamp(raw, -5.0, 5.0);
}

double format_reward(const TaggedResponse& resp) { return resp.format_ok ? 1.0 : 0.0; }

double length_penalty_think(std::int64_t y, const RewardCoefficients& c) {
  const std::int64_t lo = c.l_max - c.l_cache;
  if (y <= lo) return 0.0;
  if (y <= c.l_max) {
    return static_cast<double>(lo - std::llabs(y)) / static_cast<double>(c.l_cache);
  }
  return -1.0;
}

double length_penalty_answer(std::int64_t l_answer, const RewardCoefficients& c) {
  if (l_answer < 0) throw PreconditionViolated("negative answer length");
  if (l_answer <= c.l_min_prime) return 0.0;
  if (l_answer <= c.l_max_prime) {
    if (c.continuous_answer_penalty) {
      return std::max(-1.0, -c.lambda * static_cast<double>(l_answer - c.l_min_prime));
    }
    // Kept verbatim: the ramp starts from -lambda*l (not the excess), so at
    // default coefficients the value at l_max_prime is -1.024, below the
    // saturation plateau that follows.
    return -c.lambda * static_cast<double>(l_answer);
  }
  return -1.0;
}

RewardBreakdown combine(const TaggedResponse& resp, double acc, TaskKind kind,
                        const RewardCoefficients& c) {
  RewardBreakdown b;
  b.task_kind = kind;
  b.acc = acc;
  b.format = format_reward(resp);
  if (kind == TaskKind::general) {
    const std::int64_t y = length_gap(resp);
    b.len_think = length_penalty_think(y, c);
    b.len_answer = length_penalty_answer(resp.answer_tokens, c);
    b.len_total = b.len_think + b.len_answer;
    b.total = b.acc + c.alpha * b.format + c.beta * b.len_total;
  } else {
    b.len_think = 0.0;
    b.len_answer = 0.0;
    b.len_total = 0.0;
    b.total = b.acc + c.alpha * b.format;
  }
  return b;
}

}  // namespace zrl
