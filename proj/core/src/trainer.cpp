#include "zrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "zrl/base_policy.hpp"
#include "zrl/dataset.hpp"
#include "zrl/errors.hpp"
#include "zrl/judge_client.hpp"
#include "zrl/mock_judge.hpp"
#include "zrl/parallel.hpp"

namespace zrl {

namespace fs = std::filesystem;

int current_window(const std::vector<CurriculumStage>& curriculum, std::int64_t step) {
  if (curriculum.empty()) throw ConfigError("curriculum: empty schedule");
  int window = curriculum.front().window;
  for (const CurriculumStage& stage : curriculum) {
    if (stage.step > step) break;
    window = stage.window;
  }
  return window;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw CheckpointError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q * static_cast<double>(values.size()));
  std::size_t idx = rank <= 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  if (idx >= values.size()) idx = values.size() - 1;
  return values[idx];
}

constexpr std::string_view kTrainerStateFormat = "zrl-trainer-v1";

}  // namespace

Trainer::Trainer(const TrainConfig& config) : Trainer(config, config.base_policy_enabled) {}

Trainer::Trainer(const TrainConfig& config, bool prime_policy)
    : config_(config), vocab_(Vocab::desk()) {
  config_.validate();
  vocab_ = config_.vocab == "desk" ? Vocab::desk() : Vocab::ascii_full();
  template_ = config_.chat_template == "bare" ? Template::bare() : Template::standard();
  build_policy(prime_policy);
  optimizer_ = std::make_unique<Optimizer>(config_.optimizer, policy_->param_count());

  if (config_.judge_backend == JudgeBackend::mock) {
    judge_ = std::make_unique<MockJudge>(config_.judge);
  } else {
    HttpBackendConfig http;
    http.base_url = config_.judge_url;
    http.timeout_ms = config_.http_timeout_ms;
    http.retries = config_.http_retries;
    judge_ = std::make_unique<HttpJudge>(http);
  }
  if (config_.verifier_backend == VerifierBackend::exact) {
    verifier_ = std::make_unique<ExactMatchVerifier>(config_.verifier_normalize_ws);
  } else {
    HttpBackendConfig http;
    http.base_url = config_.verifier_url;
    http.timeout_ms = config_.http_timeout_ms;
    http.retries = config_.http_retries;
    verifier_ = std::make_unique<HttpVerifier>(http);
  }

  build_sources();
  eval_seed_ = mix_ids({config_.seed, fnv1a64("holdout")});
}

void Trainer::build_policy(bool prime) {
  if (config_.policy_kind == PolicyKind::tabular_ngram) {
    if (prime) {
      throw ConfigError(
          "base_policy.enabled: skeleton priming needs policy.kind = mlp; "
          "disable it for tabular runs");
    }
    policy_ = std::make_unique<TabularPolicy>(vocab_.size(), config_.tabular_order);
    return;
  }
  if (prime) {
    policy_ = std::make_unique<MlpPolicy>(
        make_base_policy(vocab_, config_.context_window, config_.embed_dim,
                         config_.hidden_dim, config_.seed, config_.base_policy));
  } else {
    auto mlp = std::make_unique<MlpPolicy>(vocab_.size(), config_.context_window,
                                           config_.embed_dim, config_.hidden_dim);
    Stream stream(config_.seed, fnv1a64("policy-init"));
    mlp->randomize(stream, config_.base_policy.init_scale);
    policy_ = std::move(mlp);
  }
}

void Trainer::build_sources() {
  std::map<std::string, std::vector<TaskRecord>> by_tag;
  if (!config_.dataset_path.empty()) {
    IngestOptions options;
    options.min_prompt_tokens = config_.min_prompt_tokens;
    for (TaskRecord& rec : ingest_dataset(config_.dataset_path, options)) {
      by_tag[rec.source_tag].push_back(std::move(rec));
    }
  }

  const TrainMode mode = config_.mode;
  auto kind_allowed = [mode](TaskKind kind) {
    switch (mode) {
      case TrainMode::multi_task: return true;
      case TrainMode::reasoning_only: return kind == TaskKind::verifiable;
      default: return kind == TaskKind::general;
    }
  };

  // Tags backed by the dataset use its records; otherwise "math" gets the
  // synthetic arithmetic family (the only rule-checkable one) and any other
  // tag gets the judge-scored generator.
  BlendSpec active;
  for (const auto& [tag, weight] : config_.blend.weights) {
    if (weight <= 0.0) continue;
    const std::uint64_t source_seed = mix_ids({config_.seed, fnv1a64(tag)});
    std::unique_ptr<TaskSource> source;
    if (auto it = by_tag.find(tag); it != by_tag.end()) {
      std::vector<TaskRecord> keep;
      for (TaskRecord& rec : it->second) {
        if (kind_allowed(rec.kind)) keep.push_back(std::move(rec));
      }
      if (keep.empty()) continue;
      source = std::make_unique<ListSource>(tag, std::move(keep), source_seed,
                                            config_.dataset_cycle);
    } else if (tag == "math") {
      if (!kind_allowed(TaskKind::verifiable)) continue;
      source = std::make_unique<SyntheticVerifiableSource>(tag, source_seed,
                                                           config_.difficulty);
    } else {
      if (!kind_allowed(TaskKind::general)) continue;
      source = std::make_unique<SyntheticGeneralSource>(tag, source_seed,
                                                        default_rubric_pool());
    }
    active.weights.emplace_back(tag, weight);
    sources_.push_back(std::move(source));
  }
  if (sources_.empty()) {
    throw ConfigError("blend: no sources usable under mode " +
                      std::string(to_string(config_.mode)));
  }
  double total = 0.0;
  for (const auto& [tag, weight] : active.weights) total += weight;
  for (auto& [tag, weight] : active.weights) weight /= total;
  active.validate();
  active_blend_ = std::move(active);
}

std::string Trainer::config_hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_.hash()));
  return buf;
}

std::vector<std::string> Trainer::source_cursors() const {
  std::vector<std::string> cursors;
  cursors.reserve(sources_.size());
  for (const auto& source : sources_) cursors.push_back(source->cursor());
  return cursors;
}

void Trainer::seek_sources(const std::vector<std::string>& cursors) {
  if (cursors.size() != sources_.size()) throw CheckpointError("cursor count mismatch");
  for (std::size_t i = 0; i < sources_.size(); ++i) sources_[i]->seek(cursors[i]);
}

std::vector<TaskRecord> Trainer::draw_batch() {
  std::vector<TaskSource*> pointers;
  pointers.reserve(sources_.size());
  for (const auto& source : sources_) pointers.push_back(source.get());
  Stream stream(config_.seed,
                mix_ids({fnv1a64("blend"), static_cast<std::uint64_t>(step_)}));
  return blend_batch(pointers, active_blend_, config_.batch_size, stream);
}

StepReport Trainer::attempt_step() {
  const int window = current_window(config_.curriculum, step_);
  const std::vector<TaskRecord> batch = draw_batch();

  for (const TaskRecord& rec : batch) {
    const bool ok = config_.mode == TrainMode::multi_task ||
                    (config_.mode == TrainMode::reasoning_only
                         ? rec.kind == TaskKind::verifiable
                         : rec.kind == TaskKind::general);
    if (!ok) throw PreconditionViolated("mode invariant violated by batch record " + rec.id);
  }

  const int G = config_.group_size;
  const std::size_t n_prompts = batch.size();

  std::vector<std::vector<Token>> prompt_tokens(n_prompts);
  for (std::size_t i = 0; i < n_prompts; ++i) {
    const std::vector<std::string> context = context_lines(batch[i]);
    prompt_tokens[i] = render_prompt(template_, batch[i].prompt, context, vocab_);
  }

  struct Sample {
    Rollout rollout;
    TaggedResponse parsed;
    RewardBreakdown breakdown;
  };
  std::vector<Sample> samples(n_prompts * static_cast<std::size_t>(G));

  SamplingParams sampling;
  sampling.temperature = config_.temperature;
  sampling.top_p = config_.top_p;
  sampling.max_new_tokens = window;

  parallel_for(samples.size(), config_.workers, [&](std::size_t k) {
    const std::size_t i = k / static_cast<std::size_t>(G);
    const std::uint64_t g = k % static_cast<std::size_t>(G);
    const TaskRecord& rec = batch[i];
    Stream stream(config_.seed,
                  mix_ids({fnv1a64("rollout"), static_cast<std::uint64_t>(step_),
                           static_cast<std::uint64_t>(i), g}));
    Sample s;
    s.rollout = policy_->sample(prompt_tokens[i], sampling, stream);
    s.parsed = parse_response(s.rollout.tokens, template_, vocab_,
                              static_cast<std::size_t>(window));
    double acc = 0.0;
    if (rec.kind == TaskKind::verifiable) {
      acc = accuracy_verifiable(s.parsed.answer_text(vocab_), rec.reference.value(),
                                *verifier_);
    } else {
      acc = accuracy_judge(rec.prompt, vocab_.decode(s.rollout.tokens), *judge_);
    }
    s.breakdown = combine(s.parsed, acc, rec.kind, config_.reward);
    if (!config_.length_penalty_enabled && rec.kind == TaskKind::general) {
      s.breakdown.total -= config_.reward.beta * s.breakdown.len_total;
      s.breakdown.len_think = 0.0;
      s.breakdown.len_answer = 0.0;
      s.breakdown.len_total = 0.0;
    }
    samples[k] = std::move(s);
  });

  std::vector<RolloutGroup> groups(n_prompts);
  for (std::size_t i = 0; i < n_prompts; ++i) {
    RolloutGroup& group = groups[i];
    group.prompt_id = batch[i].id;
    group.prompt = prompt_tokens[i];
    for (int g = 0; g < G; ++g) {
      const Sample& s = samples[i * static_cast<std::size_t>(G) + static_cast<std::size_t>(g)];
      group.responses.push_back(s.rollout.tokens);
      group.old_logprobs.push_back(s.rollout.logprobs);
      group.rewards.push_back(s.breakdown.total);
    }
    group.advantages = compute_advantages(group.rewards, config_.clip.advantage_mode,
                                          config_.clip.std_floor);
    group.check();
  }

  const int mini = config_.mini_batch_size == 0 ? config_.batch_size : config_.mini_batch_size;
  const int n_updates = config_.batch_size / mini;
  double objective_sum = 0.0;
  double norm_sum = 0.0;
  for (int u = 0; u < n_updates; ++u) {
    const std::span<const RolloutGroup> part(groups.data() + u * mini,
                                             static_cast<std::size_t>(mini));
    const auto new_logprobs = collect_logprobs(part, *policy_);
    objective_sum += token_objective(part, new_logprobs, config_.clip);
    const std::vector<double> grad =
        objective_gradient(part, *policy_, config_.clip, config_.workers);
    double norm2 = 0.0;
    for (double x : grad) norm2 += x * x;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw NonFinite("gradient norm is not finite");
    optimizer_->ascend(policy_->mutable_params(), grad, lr_scale_);
    for (double p : policy_->params()) {
      if (!std::isfinite(p)) throw NonFinite("parameters became non-finite after update");
    }
    norm_sum += norm;
  }

  StepReport r;
  r.step = step_;
  r.window = window;
  r.config_hash = config_hash_hex();
  r.objective = objective_sum / n_updates;
  r.grad_norm = norm_sum / n_updates;
  r.lr_scale = lr_scale_;

  std::vector<double> think_tok, answer_tok;
  think_tok.reserve(samples.size());
  answer_tok.reserve(samples.size());
  double fmt_sum = 0, trunc_sum = 0, resp_tok_sum = 0, think_chars = 0, answer_chars = 0;
  double ver_reward = 0, ver_hits = 0, ver_fmt = 0, ver_think = 0, ver_answer = 0;
  double gen_reward = 0, gen_judge = 0, gen_fmt = 0, gen_lt = 0, gen_la = 0;
  double gen_think = 0, gen_answer = 0;
  std::size_t ver_n = 0, gen_n = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    const TaskKind kind = batch[k / static_cast<std::size_t>(G)].kind;
    think_tok.push_back(s.parsed.think_tokens);
    answer_tok.push_back(s.parsed.answer_tokens);
    think_chars += static_cast<double>(s.parsed.think_chars);
    answer_chars += static_cast<double>(s.parsed.answer_chars);
    fmt_sum += s.breakdown.format;
    trunc_sum += s.parsed.truncated ? 1.0 : 0.0;
    resp_tok_sum += static_cast<double>(s.rollout.tokens.size());
    if (kind == TaskKind::verifiable) {
      ++ver_n;
      ver_reward += s.breakdown.total;
      ver_hits += s.breakdown.acc > 0.0 ? 1.0 : 0.0;
      ver_fmt += s.breakdown.format;
      ver_think += s.parsed.think_tokens;
      ver_answer += s.parsed.answer_tokens;
    } else {
      ++gen_n;
      gen_reward += s.breakdown.total;
      gen_judge += s.breakdown.acc;
      gen_fmt += s.breakdown.format;
      gen_lt += s.breakdown.len_think;
      gen_la += s.breakdown.len_answer;
      gen_think += s.parsed.think_tokens;
      gen_answer += s.parsed.answer_tokens;
    }
  }
  for (const TaskRecord& rec : batch) {
    (rec.kind == TaskKind::verifiable ? r.n_verifiable : r.n_general) += 1;
  }
  const double n_all = static_cast<double>(samples.size());
  auto safe_div = [](double a, double n) { return n > 0.0 ? a / n : 0.0; };
  r.ver_reward_mean = safe_div(ver_reward, ver_n);
  r.ver_accuracy = safe_div(ver_hits, ver_n);
  r.ver_format_mean = safe_div(ver_fmt, ver_n);
  r.gen_reward_mean = safe_div(gen_reward, gen_n);
  r.gen_judge_mean = safe_div(gen_judge, gen_n);
  r.gen_format_mean = safe_div(gen_fmt, gen_n);
  r.gen_len_think_mean = safe_div(gen_lt, gen_n);
  r.gen_len_answer_mean = safe_div(gen_la, gen_n);
  double think_sum = 0, answer_sum = 0;
  for (double v : think_tok) think_sum += v;
  for (double v : answer_tok) answer_sum += v;
  r.think_tokens_mean = think_sum / n_all;
  r.answer_tokens_mean = answer_sum / n_all;
  r.think_tokens_p50 = percentile(think_tok, 0.5);
  r.think_tokens_p90 = percentile(think_tok, 0.9);
  r.answer_tokens_p50 = percentile(answer_tok, 0.5);
  r.answer_tokens_p90 = percentile(answer_tok, 0.9);
  r.think_chars_mean = think_chars / n_all;
  r.answer_chars_mean = answer_chars / n_all;
  r.ver_think_tokens_mean = safe_div(ver_think, ver_n);
  r.ver_answer_tokens_mean = safe_div(ver_answer, ver_n);
  r.gen_think_tokens_mean = safe_div(gen_think, gen_n);
  r.gen_answer_tokens_mean = safe_div(gen_answer, gen_n);
  r.response_tokens_mean = resp_tok_sum / n_all;
  r.format_rate = fmt_sum / n_all;
  r.truncated_rate = trunc_sum / n_all;

  ++step_;
  return r;
}

StepReport Trainer::train_step() {
  const std::vector<std::string> cursors = source_cursors();
  const std::vector<double> params_backup(policy_->params().begin(), policy_->params().end());
  const std::string optimizer_backup = optimizer_->state_to_json();
  auto restore = [&] {
    seek_sources(cursors);
    const std::span<double> params = policy_->mutable_params();
    std::copy(params_backup.begin(), params_backup.end(), params.begin());
    optimizer_->state_from_json(optimizer_backup);
  };

  try {
    return attempt_step();
  } catch (const NonFinite& first) {
    restore();
    if (lr_halved_) {
      throw NonFinite("step " + std::to_string(step_) + ": " + first.what() +
                      " (learning rate was already halved once)");
    }
    lr_halved_ = true;
    lr_scale_ *= 0.5;
    try {
      return attempt_step();
    } catch (const NonFinite& second) {
      restore();
      throw NonFinite("step " + std::to_string(step_) + ": " + second.what() +
                      " (persists after halving the learning rate)");
    }
  }
}

double Trainer::eval_holdout(int n_tasks) const {
  if (n_tasks < 1) throw PreconditionViolated("eval_holdout: n_tasks must be >= 1");
  const int window = current_window(config_.curriculum, step_);
  SamplingParams sampling;
  sampling.greedy = true;
  sampling.max_new_tokens = window;

  std::vector<unsigned char> correct(static_cast<std::size_t>(n_tasks), 0);
  parallel_for(static_cast<std::size_t>(n_tasks), config_.workers, [&](std::size_t i) {
    const TaskRecord rec = gen_verifiable(eval_seed_, i, config_.difficulty, "eval");
    const std::vector<Token> prompt =
        render_prompt(template_, rec.prompt, std::span<const std::string>{}, vocab_);
    Stream stream(config_.seed, mix_ids({fnv1a64("eval-roll"), i}));
    const Rollout rollout = policy_->sample(prompt, sampling, stream);
    const TaggedResponse parsed =
        parse_response(rollout.tokens, template_, vocab_, static_cast<std::size_t>(window));
    const auto answer = parsed.answer_text(vocab_);
    if (answer && rec.reference && verifier_->equal(*answer, *rec.reference)) correct[i] = 1;
  });
  int hits = 0;
  for (unsigned char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n_tasks);
}

RunResult Trainer::run(const std::string& out_dir,
                       const std::function<bool(const StepReport&)>& callback) {
  fs::create_directories(out_dir);
  const fs::path base(out_dir);
  std::ofstream steps(base / "steps.jsonl", std::ios::app);
  std::ofstream timings(base / "timings.jsonl", std::ios::app);
  if (!steps || !timings) throw CheckpointError("cannot open log files under " + out_dir);

  RunResult result;
  while (step_ < config_.max_steps) {
    if (fs::exists(base / "STOP")) {
      result.stopped_early = true;
      result.stop_reason = "stop file";
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    StepReport report = train_step();
    if (config_.eval_every > 0 && report.step % config_.eval_every == 0) {
      report.eval_accuracy = eval_holdout(config_.eval_size);
    }
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();

    steps << step_report_to_line(report) << '\n' << std::flush;
    nlohmann::ordered_json timing;
    timing["step"] = report.step;
    timing["wall_ms"] = report.wall_ms;
    timings << timing.dump() << '\n' << std::flush;
    ++result.steps_completed;

    if (config_.stop_answer_tokens > 0 &&
        report.answer_tokens_mean >= static_cast<double>(config_.stop_answer_tokens)) {
      result.stopped_early = true;
      result.stop_reason = "answer length trigger";
      break;
    }
    if (callback && !callback(report)) {
      result.stopped_early = true;
      result.stop_reason = "callback stop";
      break;
    }
    if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) {
      save_checkpoint((base / "checkpoint").string());
    }
  }
  save_checkpoint((base / "checkpoint").string());
  return result;
}

void Trainer::save_checkpoint(const std::string& dir) const {
  fs::create_directories(dir);
  const fs::path base(dir);
  write_file(base / "config.json", config_.to_json() + "\n");
  write_file(base / "policy.json", policy_to_json(*policy_) + "\n");
  write_file(base / "optimizer.json", optimizer_->state_to_json() + "\n");

  nlohmann::ordered_json state;
  state["format"] = kTrainerStateFormat;
  state["step"] = step_;
  state["seed"] = config_.seed;
  state["lr_scale"] = lr_scale_;
  state["lr_halved"] = lr_halved_;
  state["config_hash"] = config_hash_hex();
  nlohmann::ordered_json cursors = nlohmann::ordered_json::object();
  for (const auto& source : sources_) cursors[source->tag()] = source->cursor();
  state["cursors"] = cursors;
  write_file(base / "trainer_state.json", state.dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["format"] = "zrl-manifest-v1";
  manifest["profile"] = config_.profile;
  manifest["config_hash"] = config_hash_hex();
  manifest["seed"] = config_.seed;
  manifest["step"] = step_;
  manifest["files"] = {"config.json", "policy.json", "optimizer.json", "trainer_state.json"};
  write_file(base / "manifest.json", manifest.dump(2) + "\n");
}

Trainer Trainer::from_checkpoint(const std::string& dir) {
  const fs::path base(dir);
  const TrainConfig config = parse_config_text(read_file(base / "config.json"));
  Trainer t(config, /*prime_policy=*/false);

  t.policy_ = policy_from_json(read_file(base / "policy.json"));
  if (t.policy_->kind() != config.policy_kind) {
    throw CheckpointError("checkpoint policy kind does not match the config");
  }
  if (t.policy_->vocab_size() != t.vocab_.size()) {
    throw CheckpointError("checkpoint policy vocabulary size does not match the config");
  }
  t.optimizer_ = std::make_unique<Optimizer>(config.optimizer, t.policy_->param_count());
  t.optimizer_->state_from_json(read_file(base / "optimizer.json"));

  nlohmann::json state;
  try {
    state = nlohmann::json::parse(read_file(base / "trainer_state.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("trainer state is not valid JSON: ") + e.what());
  }
  try {
    if (state.at("format").get<std::string>() != kTrainerStateFormat) {
      throw CheckpointError("unsupported trainer state format");
    }
    if (state.at("config_hash").get<std::string>() != t.config_hash_hex()) {
      throw CheckpointError("trainer state config hash does not match the config");
    }
    t.step_ = state.at("step").get<std::int64_t>();
    t.lr_scale_ = state.at("lr_scale").get<double>();
    t.lr_halved_ = state.at("lr_halved").get<bool>();
    const auto& cursors = state.at("cursors");
    for (const auto& source : t.sources_) {
      if (!cursors.contains(source->tag())) {
        throw CheckpointError("trainer state is missing the cursor for source \"" +
                              source->tag() + "\"");
      }
      source->seek(cursors.at(source->tag()).get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("trainer state missing field: ") + e.what());
  }
  return t;
}

}  // namespace zrl
