#include "zrl/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "zrl/errors.hpp"
#include "zrl/parallel.hpp"

namespace zrl {

void VerifiableDifficulty::validate() const {
  if (min_terms < 2) throw ConfigError("difficulty: min_terms must be >= 2");
  if (max_terms < min_terms) throw ConfigError("difficulty: max_terms must be >= min_terms");
  if (modulus < 2 || modulus > 1000000) {
    throw ConfigError("difficulty: modulus must lie in [2, 1000000]");
  }
}

TaskRecord gen_verifiable(std::uint64_t seed, std::uint64_t index,
                          const VerifiableDifficulty& difficulty,
                          std::string_view source_tag) {
  difficulty.validate();
  Stream s(seed, mix_ids({fnv1a64("gen-verifiable"), index}));
  const int terms =
      difficulty.min_terms +
      static_cast<int>(s.next_below(
          static_cast<std::uint64_t>(difficulty.max_terms - difficulty.min_terms) + 1));

  std::string prompt;
  std::int64_t value = 0;
  const auto m = static_cast<std::int64_t>(difficulty.modulus);
  for (int t = 0; t < terms; ++t) {
    const auto digit = static_cast<std::int64_t>(s.next_below(10));
    if (t == 0) {
      value = digit % m;
    } else {
      const bool mul = difficulty.allow_mul && s.next_below(2) == 1;
      prompt.push_back(mul ? '*' : '+');
      value = mul ? (value * digit) % m : (value + digit) % m;
    }
    prompt.push_back(static_cast<char>('0' + digit));
  }
  prompt += "=?";

  TaskRecord r;
  r.id = std::string(source_tag) + "-" + std::to_string(seed) + "-" + std::to_string(index);
  r.kind = TaskKind::verifiable;
  r.prompt = std::move(prompt);
  r.reference = std::to_string(value);
  r.source_tag = std::string(source_tag);
  return r;
}

const std::vector<std::string>& default_rubric_pool() {
  static const std::vector<std::string> pool = {
      "water", "rain",  "fire",  "wind",  "stone", "tree",  "bird",
      "fish",  "cloud", "river", "light", "sound", "music", "dream",
      "story", "dance", "color", "night", "ocean", "grass",
  };
  return pool;
}

TaskRecord gen_general(std::uint64_t seed, std::uint64_t index,
                       std::span<const std::string> rubric_pool,
                       std::string_view source_tag) {
  if (rubric_pool.empty()) throw PreconditionViolated("rubric pool must be non-empty");
  Stream s(seed, mix_ids({fnv1a64("gen-general"), index}));

  std::vector<std::string> topics;
  topics.push_back(rubric_pool[s.next_below(rubric_pool.size())]);
  if (rubric_pool.size() > 1 && s.next_double() < 0.35) {
    std::string second = rubric_pool[s.next_below(rubric_pool.size())];
    if (second != topics[0]) topics.push_back(std::move(second));
  }

  // Every non-topic word below is judge-stopword vocabulary; see
  // judge_stopwords() in the mock judge.
  std::string joined = topics[0];
  if (topics.size() == 2) joined += " and " + topics[1];
  std::string prompt;
  switch (s.next_below(5)) {
    case 0: prompt = "tell me about " + joined; break;
    case 1: prompt = "explain " + joined; break;
    case 2: prompt = "describe " + joined; break;
    case 3: prompt = "what is " + joined + "?"; break;
    default: prompt = "write about " + joined; break;
  }

  TaskRecord r;
  r.id = std::string(source_tag) + "-" + std::to_string(seed) + "-" + std::to_string(index);
  r.kind = TaskKind::general;
  r.prompt = std::move(prompt);
  r.rubric = std::move(topics);
  r.source_tag = std::string(source_tag);
  return r;
}

std::vector<std::string> context_lines(const TaskRecord& record) {
  std::vector<std::string> lines;
  lines.reserve(record.context_turns.size());
  for (const Turn& turn : record.context_turns) {
    lines.push_back(turn.role + ": " + turn.text);
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Sources

namespace {

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw CheckpointError(std::string("malformed source cursor: ") + what);
  }
  return value;
}

}  // namespace

SyntheticVerifiableSource::SyntheticVerifiableSource(std::string tag, std::uint64_t seed,
                                                     VerifiableDifficulty difficulty)
    : tag_(std::move(tag)), seed_(seed), difficulty_(difficulty) {
  difficulty_.validate();
}

TaskRecord SyntheticVerifiableSource::next() {
  return gen_verifiable(seed_, index_++, difficulty_, tag_);
}

std::string SyntheticVerifiableSource::cursor() const { return std::to_string(index_); }

void SyntheticVerifiableSource::seek(const std::string& cursor) {
  index_ = parse_u64(cursor, "synthetic index");
}

SyntheticGeneralSource::SyntheticGeneralSource(std::string tag, std::uint64_t seed,
                                               std::vector<std::string> rubric_pool)
    : tag_(std::move(tag)), seed_(seed), pool_(std::move(rubric_pool)) {
  if (pool_.empty()) throw ConfigError("general source: rubric pool must be non-empty");
}

TaskRecord SyntheticGeneralSource::next() {
  return gen_general(seed_, index_++, pool_, tag_);
}

std::string SyntheticGeneralSource::cursor() const { return std::to_string(index_); }

void SyntheticGeneralSource::seek(const std::string& cursor) {
  index_ = parse_u64(cursor, "synthetic index");
}

ListSource::ListSource(std::string tag, std::vector<TaskRecord> records,
                       std::uint64_t seed, bool cycle)
    : tag_(std::move(tag)), records_(std::move(records)), seed_(seed), cycle_(cycle) {
  reshuffle();
}

void ListSource::reshuffle() {
  perm_.resize(records_.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
  Stream s(seed_, mix_ids({fnv1a64("list-epoch"), epoch_}));
  for (std::size_t i = perm_.size(); i > 1; --i) {
    const std::size_t j = s.next_below(i);
    std::swap(perm_[i - 1], perm_[j]);
  }
}

TaskRecord ListSource::next() {
  if (records_.empty()) throw EmptySource("source \"" + tag_ + "\" has no records");
  if (pos_ == records_.size()) {
    if (!cycle_) throw EmptySource("source \"" + tag_ + "\" is exhausted");
    ++epoch_;
    pos_ = 0;
    reshuffle();
  }
  return records_[perm_[pos_++]];
}

std::string ListSource::cursor() const {
  return std::to_string(epoch_) + ":" + std::to_string(pos_);
}

void ListSource::seek(const std::string& cursor) {
  const auto colon = cursor.find(':');
  if (colon == std::string::npos) throw CheckpointError("malformed list cursor");
  const std::uint64_t epoch = parse_u64(cursor.substr(0, colon), "epoch");
  const std::uint64_t pos = parse_u64(cursor.substr(colon + 1), "position");
  if (pos > records_.size()) throw CheckpointError("list cursor out of range");
  epoch_ = epoch;
  pos_ = static_cast<std::size_t>(pos);
  reshuffle();
}

// ---------------------------------------------------------------------------
// Blending

void BlendSpec::validate() const {
  if (weights.empty()) throw ConfigError("blend: no source weights given");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& [tag, w] = weights[i];
    if (tag.empty()) throw ConfigError("blend: empty source tag");
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("blend: weight of \"" + tag + "\" must be finite and >= 0");
    }
    for (std::size_t j = i + 1; j < weights.size(); ++j) {
      if (weights[j].first == tag) throw ConfigError("blend: duplicate tag \"" + tag + "\"");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ConfigError("blend: weights must sum to 1, got " + std::to_string(sum));
  }
}

double BlendSpec::weight_of(std::string_view tag) const {
  for (const auto& [t, w] : weights) {
    if (t == tag) return w;
  }
  return 0.0;
}

BlendSpec BlendSpec::paper_default() {
  constexpr double kMath = 178535.0;
  constexpr double kStem = 125798.0;
  constexpr double kChat = 36125.0;
  constexpr double kTotal = kMath + kStem + kChat;
  BlendSpec spec;
  spec.weights = {{"math", kMath / kTotal}, {"stem", kStem / kTotal}, {"chat", kChat / kTotal}};
  return spec;
}

std::vector<TaskRecord> blend_batch(std::span<TaskSource* const> sources,
                                    const BlendSpec& spec, int batch_size,
                                    Stream& stream) {
  spec.validate();
  if (batch_size < 1) throw PreconditionViolated("batch_size must be >= 1");
  if (sources.empty()) throw PreconditionViolated("no task sources given");

  for (TaskSource* const src : sources) {
    bool found = false;
    for (const auto& [tag, w] : spec.weights) found = found || tag == src->tag();
    if (!found) throw ConfigError("blend: source \"" + src->tag() + "\" has no weight");
  }

  // Positive-weight entries in spec order, each resolved to its source.
  std::vector<std::pair<TaskSource*, double>> active;
  double total = 0.0;
  for (const auto& [tag, w] : spec.weights) {
    if (w <= 0.0) continue;
    TaskSource* match = nullptr;
    for (TaskSource* const src : sources) {
      if (src->tag() == tag) match = src;
    }
    if (match == nullptr) throw ConfigError("blend: no source for weighted tag \"" + tag + "\"");
    active.emplace_back(match, w);
    total += w;
  }
  if (active.empty()) throw ConfigError("blend: all weights are zero");

  std::vector<TaskRecord> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int slot = 0; slot < batch_size; ++slot) {
    const double u = stream.next_double() * total;
    double cum = 0.0;
    TaskSource* chosen = active.back().first;
    for (const auto& [src, w] : active) {
      cum += w;
      if (u < cum) {
        chosen = src;
        break;
      }
    }
    batch.push_back(chosen->next());
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Difficulty filter

FilterOutcome difficulty_filter(std::span<const TaskRecord> records,
                                const Policy& policy, int k,
                                const SamplingParams& sampling, const Template& tmpl,
                                const Vocab& vocab, const Verifier& verifier,
                                std::uint64_t seed, unsigned workers) {
  if (k < 2) throw PreconditionViolated("difficulty filter needs k >= 2");
  sampling.validate();
  for (const TaskRecord& rec : records) {
    if (rec.kind != TaskKind::verifiable) {
      throw PreconditionViolated("difficulty filter takes verifiable records only");
    }
  }

  FilterOutcome outcome;
  outcome.pass_counts.assign(records.size(), 0);
  const std::uint64_t ns = fnv1a64("difficulty-filter");
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const TaskRecord& rec = records[i];
    const auto prompt = render_prompt(tmpl, rec.prompt, context_lines(rec), vocab);
    int passes = 0;
    for (int j = 0; j < k; ++j) {
      Stream rs(seed, mix_ids({ns, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)}));
      const Rollout rollout = policy.sample(prompt, sampling, rs);
      const TaggedResponse parsed = parse_response(
          rollout.tokens, tmpl, vocab, static_cast<std::size_t>(sampling.max_new_tokens));
      if (!parsed.format_ok) continue;
      const auto answer = parsed.answer_text(vocab);
      if (answer.has_value() && verifier.equal(*answer, *rec.reference)) ++passes;
    }
    outcome.pass_counts[i] = passes;
  });

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcome.pass_counts[i] > 0 && outcome.pass_counts[i] < k) {
      outcome.kept.push_back(records[i]);
    }
  }
  return outcome;
}

}  // namespace zrl
