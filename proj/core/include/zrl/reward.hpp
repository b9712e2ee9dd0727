#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "zrl/chat_format.hpp"

namespace zrl {

enum class TaskKind { verifiable, general };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

/// Every coefficient and threshold of the reward stack. Defaults are the
/// full-scale profile values; desk configs scale the token thresholds down.
struct RewardCoefficients {
  double alpha = 0.5;        // format reward weight
  double beta = 2.0;         // length penalty weight
  double lambda = 0.00025;   // answer-penalty slope per token
  std::int64_t l_max = 2048;       // think-gap penalty saturation
  std::int64_t l_cache = 1536;     // think-gap penalty ramp width
  std::int64_t l_min_prime = 1024; // answer penalty free threshold
  std::int64_t l_max_prime = 4096; // answer penalty saturation

  /// Off by default: the printed formula keeps the jump at l_min_prime and
  /// the overshoot at l_max_prime; this flag switches to the shifted ramp
  /// -lambda*(l - l_min_prime) clamped at -1.
  bool continuous_answer_penalty = false;

  void validate() const;  ///< throws ConfigError naming the offending field
};

/// Per-response reward ledger.
struct RewardBreakdown {
  double acc = 0.0;         // verifiable: {-1,1}; general: judge score in [-5,5]
  double format = 0.0;      // {0,1}
  double len_think = 0.0;   // [-1, 0]
  double len_answer = 0.0;  // <= 0
  double len_total = 0.0;   // len_think + len_answer
  double total = 0.0;
  TaskKind task_kind = TaskKind::verifiable;
};

/// Equality oracle for verifiable tasks.
class Verifier {
 public:
  virtual ~Verifier() = default;
  /// May throw VerifierUnavailable (remote backends, after retries).
  virtual bool equal(const std::string& answer, const std::string& reference) const = 0;
};

/// Exact string match, optionally after whitespace normalization
/// (strip leading/trailing whitespace, collapse interior runs to one space).
class ExactMatchVerifier : public Verifier {
 public:
  explicit ExactMatchVerifier(bool normalize_whitespace = true)
      : normalize_(normalize_whitespace) {}
  bool equal(const std::string& answer, const std::string& reference) const override;

 private:
  bool normalize_;
};

/// Scalar scoring backend for general tasks.
class Judge {
 public:
  virtual ~Judge() = default;
  /// Raw score; the engine clamps to [-5, 5]. May throw JudgeUnavailable or
  /// JudgeMalformed (remote backends).
  virtual double score(const std::string& prompt, const std::string& response) const = 0;
};

/// Binary accuracy reward for verifiable tasks: 1 if the verifier accepts,
/// else -1. nullopt answer (no extractable span) is -1 without consulting
/// the verifier. Reference must be non-empty.
double accuracy_verifiable(const std::optional<std::string>& answer_span,
                           const std::string& reference, const Verifier& verifier);

/// Judge score clamped to [-5, 5]. Responses with broken format are still
/// scored; structure is the format reward's job.
double accuracy_judge(const std::string& prompt, const std::string& response,
                      const Judge& judge);

/// 1 iff the response matches the tag grammar.
double format_reward(const TaggedResponse& resp);

/// Piecewise penalty on y = answer_tokens - think_tokens:
///   0                                  y <= l_max - l_cache
///   ((l_max - l_cache) - |y|)/l_cache  l_max - l_cache < y <= l_max
///   -1                                 y > l_max
double length_penalty_think(std::int64_t y, const RewardCoefficients& c);

/// Piecewise penalty on the answer token count:
///   0                 l <= l_min_prime
///   -lambda * l       l_min_prime < l <= l_max_prime
///   -1                l > l_max_prime
/// Requires l_answer >= 0.
double length_penalty_answer(std::int64_t l_answer, const RewardCoefficients& c);

/// Assembles the full breakdown. Length penalties apply only to general
/// tasks; verifiable totals are acc + alpha*format.
RewardBreakdown combine(const TaggedResponse& resp, double acc, TaskKind kind,
                        const RewardCoefficients& c);

}  // namespace zrl
