#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zrl/chat_format.hpp"
#include "zrl/config.hpp"
#include "zrl/report.hpp"
#include "zrl/tasks.hpp"

namespace zrl {

/// Step function over the curriculum schedule: the window of the last stage
/// whose step is <= `step`.
int current_window(const std::vector<CurriculumStage>& curriculum, std::int64_t step);

struct RunResult {
  std::int64_t steps_completed = 0;
  bool stopped_early = false;
  std::string stop_reason;
};

/// Owns the full training loop: policy, optimizer, task sources, reward
/// backends, and the step counter. Every random draw comes from a stream
/// keyed by (seed, purpose, step, ...), so a run is a pure function of its
/// config and checkpoints carry no generator state beyond source cursors.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);

  /// Rebuilds a mid-run trainer from a save_checkpoint directory. The
  /// continuation is bit-identical to the uninterrupted run.
  static Trainer from_checkpoint(const std::string& dir);

  /// One full step: batch, rollouts, rewards, advantages, mini-batch ascent.
  /// On NonFinite the step is rolled back and retried once at half the
  /// learning rate (the halving persists); a second failure propagates.
  StepReport train_step();

  /// Loops train_step to max_steps, appending steps.jsonl and the
  /// timings.jsonl sidecar under out_dir and checkpointing into
  /// out_dir/checkpoint. Stops early at a step boundary on a "STOP" file in
  /// out_dir, a false-returning callback, or the answer-length trigger.
  RunResult run(const std::string& out_dir,
                const std::function<bool(const StepReport&)>& callback = {});

  void save_checkpoint(const std::string& dir) const;

  /// Greedy-decoding accuracy on held-out synthetic arithmetic of the
  /// training difficulty; the generator seed is disjoint from training's.
  double eval_holdout(int n_tasks) const;

  const TrainConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const Template& chat_template() const { return template_; }
  const Policy& policy() const { return *policy_; }
  Policy& mutable_policy() { return *policy_; }
  std::int64_t step() const { return step_; }
  double lr_scale() const { return lr_scale_; }
  int window() const { return current_window(config_.curriculum, step_); }
  std::string config_hash_hex() const;

 private:
  Trainer(const TrainConfig& config, bool prime_policy);

  void build_policy(bool prime);
  void build_sources();
  std::vector<TaskRecord> draw_batch();
  StepReport attempt_step();
  std::vector<std::string> source_cursors() const;
  void seek_sources(const std::vector<std::string>& cursors);

  TrainConfig config_;
  Vocab vocab_;
  Template template_;
  std::unique_ptr<Policy> policy_;
  std::unique_ptr<Optimizer> optimizer_;
  std::unique_ptr<Judge> judge_;
  std::unique_ptr<Verifier> verifier_;
  std::vector<std::unique_ptr<TaskSource>> sources_;
  BlendSpec active_blend_;  // config blend after mode filtering, renormalized
  std::uint64_t eval_seed_ = 0;
  std::int64_t step_ = 0;
  double lr_scale_ = 1.0;
  bool lr_halved_ = false;
};

}  // namespace zrl
