#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zrl/chat_format.hpp"
#include "zrl/dataset.hpp"
#include "zrl/policy.hpp"
#include "zrl/reward.hpp"
#include "zrl/rng.hpp"
#include "zrl/vocab.hpp"

namespace zrl {

/// Knobs for synthetic arithmetic: left-to-right operand chains reduced
/// modulo `modulus` after every operation.
struct VerifiableDifficulty {
  int min_terms = 2;
  int max_terms = 2;
  int modulus = 10;
  bool allow_mul = true;

  void validate() const;  ///< throws ConfigError
};

/// Deterministic in (seed, index): the same pair always yields the same
/// record, so a synthetic corpus never needs to be stored.
TaskRecord gen_verifiable(std::uint64_t seed, std::uint64_t index,
                          const VerifiableDifficulty& difficulty,
                          std::string_view source_tag = "math");

/// Open-ended prompt ("tell me about water") plus the rubric keywords a
/// judge should reward. Topic words come from the pool; everything else in
/// the prompt is judge-stopword vocabulary, so a prompt-reading judge
/// recovers exactly the record's rubric.
TaskRecord gen_general(std::uint64_t seed, std::uint64_t index,
                       std::span<const std::string> rubric_pool,
                       std::string_view source_tag = "chat");

/// Topic words available in the compact desk vocabulary.
const std::vector<std::string>& default_rubric_pool();

/// Context turns flattened to "role: text" lines for prompt rendering.
std::vector<std::string> context_lines(const TaskRecord& record);

/// Streaming provider of task records, one per next() call. Cursor
/// round-trips make mid-run checkpoints exact.
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual const std::string& tag() const = 0;
  virtual TaskRecord next() = 0;  ///< throws EmptySource when exhausted
  virtual std::string cursor() const = 0;
  virtual void seek(const std::string& cursor) = 0;  ///< throws CheckpointError
};

class SyntheticVerifiableSource final : public TaskSource {
 public:
  SyntheticVerifiableSource(std::string tag, std::uint64_t seed,
                            VerifiableDifficulty difficulty);
  const std::string& tag() const override { return tag_; }
  TaskRecord next() override;
  std::string cursor() const override;
  void seek(const std::string& cursor) override;

 private:
  std::string tag_;
  std::uint64_t seed_;
  VerifiableDifficulty difficulty_;
  std::uint64_t index_ = 0;
};

class SyntheticGeneralSource final : public TaskSource {
 public:
  SyntheticGeneralSource(std::string tag, std::uint64_t seed,
                         std::vector<std::string> rubric_pool);
  const std::string& tag() const override { return tag_; }
  TaskRecord next() override;
  std::string cursor() const override;
  void seek(const std::string& cursor) override;

 private:
  std::string tag_;
  std::uint64_t seed_;
  std::vector<std::string> pool_;
  std::uint64_t index_ = 0;
};

/// Finite record list served in per-epoch shuffled order without
/// replacement. With cycle=false, exhausting the list raises EmptySource.
class ListSource final : public TaskSource {
 public:
  ListSource(std::string tag, std::vector<TaskRecord> records, std::uint64_t seed,
             bool cycle);
  const std::string& tag() const override { return tag_; }
  TaskRecord next() override;
  std::string cursor() const override;
  void seek(const std::string& cursor) override;

 private:
  void reshuffle();

  std::string tag_;
  std::vector<TaskRecord> records_;
  std::uint64_t seed_;
  bool cycle_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> perm_;
};

/// Per-source draw weights; must sum to 1 and be non-negative.
struct BlendSpec {
  std::vector<std::pair<std::string, double>> weights;

  void validate() const;  ///< throws ConfigError
  double weight_of(std::string_view tag) const;

  /// Source proportions of the full-scale corpus: math 178,535 prompts,
  /// STEM 125,798, general conversation 36,125.
  static BlendSpec paper_default();
};

/// One batch: a weighted source draw per slot, then that source's next
/// record. Every present source must have a weight and every positively
/// weighted tag must have a source.
std::vector<TaskRecord> blend_batch(std::span<TaskSource* const> sources,
                                    const BlendSpec& spec, int batch_size,
                                    Stream& stream);

struct FilterOutcome {
  std::vector<TaskRecord> kept;
  std::vector<int> pass_counts;  // aligned with the input records
};

/// Difficulty band filter: k rollouts per record, keep records the policy
/// solves some but not all of the time (0 < pass count < k).
FilterOutcome difficulty_filter(std::span<const TaskRecord> records,
                                const Policy& policy, int k,
                                const SamplingParams& sampling, const Template& tmpl,
                                const Vocab& vocab, const Verifier& verifier,
                                std::uint64_t seed, unsigned workers = 1);

}  // namespace zrl
