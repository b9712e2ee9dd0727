#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zrl/base_policy.hpp"
#include "zrl/grpo.hpp"
#include "zrl/mock_judge.hpp"
#include "zrl/optim.hpp"
#include "zrl/policy.hpp"
#include "zrl/reward.hpp"
#include "zrl/tasks.hpp"

namespace zrl {

enum class TrainMode { multi_task, reasoning_only, general_only };
enum class JudgeBackend { mock, http };
enum class VerifierBackend { exact, http };

std::string_view to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view s);

struct CurriculumStage {
  std::int64_t step = 0;
  int window = 0;

  bool operator==(const CurriculumStage&) const = default;
};

/// Everything a run needs. Every field maps one-to-one onto a config file
/// key (nested structs use dotted keys, e.g. "clip.epsilon"); see
/// configs/desk.cfg for the commented reference file.
struct TrainConfig {
  std::string profile = "desk";
  std::string vocab = "desk";            // "desk" | "ascii"
  std::string chat_template = "bare";    // "bare" | "standard"

  PolicyKind policy_kind = PolicyKind::mlp;
  int context_window = 16;
  int embed_dim = 8;
  int hidden_dim = 48;
  int tabular_order = 2;  // used when policy_kind == tabular_ngram

  bool base_policy_enabled = true;
  BasePolicyRecipe base_policy;

  int batch_size = 32;
  int mini_batch_size = 0;  // 0 means batch_size: single on-policy update
  int group_size = 8;
  double temperature = 1.0;
  double top_p = 1.0;

  RewardCoefficients reward;
  ClipConfig clip;
  std::vector<CurriculumStage> curriculum = {{0, 16}};
  BlendSpec blend;
  TrainMode mode = TrainMode::multi_task;
  bool length_penalty_enabled = true;
  OptimizerConfig optimizer;
  std::int64_t max_steps = 2000;
  std::uint64_t seed = 1;
  double kl_coefficient = 0.0;  // pinned to zero; validation rejects anything else

  JudgeBackend judge_backend = JudgeBackend::mock;
  MockJudgeConfig judge;
  std::string judge_url;
  VerifierBackend verifier_backend = VerifierBackend::exact;
  std::string verifier_url;
  bool verifier_normalize_ws = true;
  int http_timeout_ms = 5000;
  int http_retries = 2;

  VerifiableDifficulty difficulty;
  std::string dataset_path;      // optional JSONL corpus served as list sources
  bool dataset_cycle = true;
  int min_prompt_tokens = 0;

  std::int64_t checkpoint_every = 0;  // 0: checkpoint only at exit
  std::int64_t eval_every = 0;        // 0: no held-out evaluation
  int eval_size = 200;
  std::int64_t stop_answer_tokens = 0;  // length-explosion early stop; 0: off
  unsigned workers = 1;

  void validate() const;  ///< throws ConfigError naming the offending field

  /// Canonical "key = value" lines, sorted by key, every key present. Equal
  /// configs produce equal bytes; the run hash is taken over this text.
  std::string canonical() const;
  std::uint64_t hash() const;

  /// JSON equivalent of the key-value format (flat object, same keys).
  std::string to_json() const;

  static TrainConfig desk_profile();
  static TrainConfig paper_profile();
};

/// Parses either format: JSON when the first non-space byte is '{',
/// otherwise "#"-commented key = value lines. A "profile" key is applied
/// first (resetting defaults), then the remaining keys in file order.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);

/// Applies one "key=value" override on top of an existing config.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace zrl
