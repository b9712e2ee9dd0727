#include "zrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "zrl/errors.hpp"
#include "zrl/rng.hpp"

namespace zrl {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::multi_task: return "multi_task";
    case TrainMode::reasoning_only: return "reasoning_only";
    default: return "general_only";
  }
}

TrainMode train_mode_from_string(std::string_view s) {
  if (s == "multi_task") return TrainMode::multi_task;
  if (s == "reasoning_only") return TrainMode::reasoning_only;
  if (s == "general_only") return TrainMode::general_only;
  throw ConfigError("unknown mode: " + std::string(s));
}

namespace {

std::string_view backend_name(JudgeBackend b) { return b == JudgeBackend::mock ? "mock" : "http"; }
std::string_view backend_name(VerifierBackend b) {
  return b == VerifierBackend::exact ? "exact" : "http";
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw ConfigError("unformattable number");
  return std::string(buf, ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

double parse_double(const std::string& key, const std::string& raw) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    throw ConfigError(key + ": expected a number, got \"" + raw + "\"");
  }
  return v;
}

std::int64_t parse_i64(const std::string& key, const std::string& raw) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    throw ConfigError(key + ": expected an integer, got \"" + raw + "\"");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got \"" + raw + "\"");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& raw) {
  const std::int64_t v = parse_i64(key, raw);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": value out of range");
  }
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
  throw ConfigError(key + ": expected a boolean, got \"" + raw + "\"");
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(std::string_view(s).substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::string curriculum_to_string(const std::vector<CurriculumStage>& stages) {
  std::string out;
  for (const auto& st : stages) {
    if (!out.empty()) out += ",";
    out += std::to_string(st.step) + ":" + std::to_string(st.window);
  }
  return out;
}

std::vector<CurriculumStage> parse_curriculum(const std::string& key, const std::string& raw) {
  std::vector<CurriculumStage> stages;
  for (const std::string& item : split(raw, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError(key + ": expected step:window pairs, got \"" + item + "\"");
    }
    CurriculumStage st;
    st.step = parse_i64(key, trim(item.substr(0, colon)));
    st.window = parse_int(key, trim(item.substr(colon + 1)));
    stages.push_back(st);
  }
  if (stages.empty()) throw ConfigError(key + ": empty schedule");
  return stages;
}

std::string blend_to_string(const BlendSpec& blend) {
  std::string out;
  for (const auto& [tag, w] : blend.weights) {
    if (!out.empty()) out += ",";
    out += tag + ":" + fmt_double(w);
  }
  return out;
}

BlendSpec parse_blend(const std::string& key, const std::string& raw) {
  BlendSpec spec;
  for (const std::string& item : split(raw, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError(key + ": expected tag:weight pairs, got \"" + item + "\"");
    }
    spec.weights.emplace_back(trim(item.substr(0, colon)),
                              parse_double(key, trim(item.substr(colon + 1))));
  }
  if (spec.weights.empty()) throw ConfigError(key + ": empty blend");
  return spec;
}

std::vector<std::pair<std::string, std::string>> to_kv(const TrainConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto put = [&](std::string key, std::string value) {
    kv.emplace_back(std::move(key), std::move(value));
  };
  put("profile", c.profile);
  put("vocab", c.vocab);
  put("chat_template", c.chat_template);
  put("rng.algorithm", std::string(rng::kAlgorithm));

  put("policy.kind", std::string(to_string(c.policy_kind)));
  put("policy.context_window", std::to_string(c.context_window));
  put("policy.embed_dim", std::to_string(c.embed_dim));
  put("policy.hidden_dim", std::to_string(c.hidden_dim));
  put("policy.tabular_order", std::to_string(c.tabular_order));

  put("base_policy.enabled", fmt_bool(c.base_policy_enabled));
  put("base_policy.sample_count", std::to_string(c.base_policy.sample_count));
  put("base_policy.fit_steps", std::to_string(c.base_policy.fit_steps));
  put("base_policy.learning_rate", fmt_double(c.base_policy.learning_rate));
  put("base_policy.init_scale", fmt_double(c.base_policy.init_scale));
  put("base_policy.think_min", std::to_string(c.base_policy.think_min));
  put("base_policy.think_max", std::to_string(c.base_policy.think_max));
  put("base_policy.answer_min", std::to_string(c.base_policy.answer_min));
  put("base_policy.answer_max", std::to_string(c.base_policy.answer_max));
  put("base_policy.prompt_min", std::to_string(c.base_policy.prompt_min));
  put("base_policy.prompt_max", std::to_string(c.base_policy.prompt_max));
  put("base_policy.arithmetic_prompt_fraction",
      fmt_double(c.base_policy.arithmetic_prompt_fraction));

  put("batch_size", std::to_string(c.batch_size));
  put("mini_batch_size", std::to_string(c.mini_batch_size));
  put("group_size", std::to_string(c.group_size));
  put("sampling.temperature", fmt_double(c.temperature));
  put("sampling.top_p", fmt_double(c.top_p));

  put("reward.alpha", fmt_double(c.reward.alpha));
  put("reward.beta", fmt_double(c.reward.beta));
  put("reward.lambda", fmt_double(c.reward.lambda));
  put("reward.l_max", std::to_string(c.reward.l_max));
  put("reward.l_cache", std::to_string(c.reward.l_cache));
  put("reward.l_min_prime", std::to_string(c.reward.l_min_prime));
  put("reward.l_max_prime", std::to_string(c.reward.l_max_prime));
  put("reward.continuous_answer_penalty", fmt_bool(c.reward.continuous_answer_penalty));

  put("clip.epsilon", fmt_double(c.clip.epsilon));
  put("clip.advantage_mode", std::string(to_string(c.clip.advantage_mode)));
  put("clip.std_floor", fmt_double(c.clip.std_floor));

  put("curriculum", curriculum_to_string(c.curriculum));
  put("blend", blend_to_string(c.blend));
  put("mode", std::string(to_string(c.mode)));
  put("length_penalty_enabled", fmt_bool(c.length_penalty_enabled));

  put("optimizer.kind", std::string(to_string(c.optimizer.kind)));
  put("optimizer.learning_rate", fmt_double(c.optimizer.learning_rate));
  put("optimizer.beta1", fmt_double(c.optimizer.beta1));
  put("optimizer.beta2", fmt_double(c.optimizer.beta2));
  put("optimizer.eps", fmt_double(c.optimizer.eps));

  put("max_steps", std::to_string(c.max_steps));
  put("seed", std::to_string(c.seed));
  put("kl_coefficient", fmt_double(c.kl_coefficient));

  put("judge.backend", std::string(backend_name(c.judge_backend)));
  put("judge.url", c.judge_url);
  put("judge.length_bias_scale", fmt_double(c.judge.length_bias_scale));
  put("judge.length_bias_cap", fmt_double(c.judge.length_bias_cap));
  put("judge.rubric_weight", fmt_double(c.judge.rubric_weight));
  put("judge.floor", fmt_double(c.judge.floor));
  put("judge.noise_std", fmt_double(c.judge.noise_std));
  put("judge.seed", std::to_string(c.judge.seed));

  put("verifier.backend", std::string(backend_name(c.verifier_backend)));
  put("verifier.url", c.verifier_url);
  put("verifier.normalize_whitespace", fmt_bool(c.verifier_normalize_ws));
  put("http.timeout_ms", std::to_string(c.http_timeout_ms));
  put("http.retries", std::to_string(c.http_retries));

  put("difficulty.min_terms", std::to_string(c.difficulty.min_terms));
  put("difficulty.max_terms", std::to_string(c.difficulty.max_terms));
  put("difficulty.modulus", std::to_string(c.difficulty.modulus));
  put("difficulty.allow_mul", fmt_bool(c.difficulty.allow_mul));

  put("dataset.path", c.dataset_path);
  put("dataset.cycle", fmt_bool(c.dataset_cycle));
  put("dataset.min_prompt_tokens", std::to_string(c.min_prompt_tokens));

  put("checkpoint_every", std::to_string(c.checkpoint_every));
  put("eval_every", std::to_string(c.eval_every));
  put("eval_size", std::to_string(c.eval_size));
  put("stop_answer_tokens", std::to_string(c.stop_answer_tokens));
  put("workers", std::to_string(c.workers));
  return kv;
}

void set_field(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "profile") {
    if (value == "desk") {
      c = TrainConfig::desk_profile();
    } else if (value == "paper") {
      c = TrainConfig::paper_profile();
    } else {
      throw ConfigError("profile: expected \"desk\" or \"paper\", got \"" + value + "\"");
    }
  } else if (key == "vocab") {
    if (value != "desk" && value != "ascii") {
      throw ConfigError("vocab: expected \"desk\" or \"ascii\", got \"" + value + "\"");
    }
    c.vocab = value;
  } else if (key == "chat_template") {
    if (value != "bare" && value != "standard") {
      throw ConfigError("chat_template: expected \"bare\" or \"standard\"");
    }
    c.chat_template = value;
  } else if (key == "rng.algorithm") {
    if (value != rng::kAlgorithm) {
      throw ConfigError("rng.algorithm: this build provides only \"" +
                        std::string(rng::kAlgorithm) + "\"");
    }
  } else if (key == "policy.kind") {
    if (value == "mlp") {
      c.policy_kind = PolicyKind::mlp;
    } else if (value == "tabular_ngram") {
      c.policy_kind = PolicyKind::tabular_ngram;
    } else {
      throw ConfigError("policy.kind: expected \"mlp\" or \"tabular_ngram\"");
    }
  } else if (key == "policy.context_window") {
    c.context_window = parse_int(key, value);
  } else if (key == "policy.embed_dim") {
    c.embed_dim = parse_int(key, value);
  } else if (key == "policy.hidden_dim") {
    c.hidden_dim = parse_int(key, value);
  } else if (key == "policy.tabular_order") {
    c.tabular_order = parse_int(key, value);
  } else if (key == "base_policy.enabled") {
    c.base_policy_enabled = parse_bool(key, value);
  } else if (key == "base_policy.sample_count") {
    c.base_policy.sample_count = parse_int(key, value);
  } else if (key == "base_policy.fit_steps") {
    c.base_policy.fit_steps = parse_int(key, value);
  } else if (key == "base_policy.learning_rate") {
    c.base_policy.learning_rate = parse_double(key, value);
  } else if (key == "base_policy.init_scale") {
    c.base_policy.init_scale = parse_double(key, value);
  } else if (key == "base_policy.think_min") {
    c.base_policy.think_min = parse_int(key, value);
  } else if (key == "base_policy.think_max") {
    c.base_policy.think_max = parse_int(key, value);
  } else if (key == "base_policy.answer_min") {
    c.base_policy.answer_min = parse_int(key, value);
  } else if (key == "base_policy.answer_max") {
    c.base_policy.answer_max = parse_int(key, value);
  } else if (key == "base_policy.prompt_min") {
    c.base_policy.prompt_min = parse_int(key, value);
  } else if (key == "base_policy.prompt_max") {
    c.base_policy.prompt_max = parse_int(key, value);
  } else if (key == "base_policy.arithmetic_prompt_fraction") {
    c.base_policy.arithmetic_prompt_fraction = parse_double(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_int(key, value);
  } else if (key == "mini_batch_size") {
    c.mini_batch_size = parse_int(key, value);
  } else if (key == "group_size") {
    c.group_size = parse_int(key, value);
  } else if (key == "sampling.temperature") {
    c.temperature = parse_double(key, value);
  } else if (key == "sampling.top_p") {
    c.top_p = parse_double(key, value);
  } else if (key == "reward.alpha") {
    c.reward.alpha = parse_double(key, value);
  } else if (key == "reward.beta") {
    c.reward.beta = parse_double(key, value);
  } else if (key == "reward.lambda") {
    c.reward.lambda = parse_double(key, value);
  } else if (key == "reward.l_max") {
    c.reward.l_max = parse_i64(key, value);
  } else if (key == "reward.l_cache") {
    c.reward.l_cache = parse_i64(key, value);
  } else if (key == "reward.l_min_prime") {
    c.reward.l_min_prime = parse_i64(key, value);
  } else if (key == "reward.l_max_prime") {
    c.reward.l_max_prime = parse_i64(key, value);
  } else if (key == "reward.continuous_answer_penalty") {
    c.reward.continuous_answer_penalty = parse_bool(key, value);
  } else if (key == "clip.epsilon") {
    c.clip.epsilon = parse_double(key, value);
  } else if (key == "clip.advantage_mode") {
    c.clip.advantage_mode = advantage_mode_from_string(value);
  } else if (key == "clip.std_floor") {
    c.clip.std_floor = parse_double(key, value);
  } else if (key == "curriculum") {
    c.curriculum = parse_curriculum(key, value);
  } else if (key == "blend") {
    c.blend = parse_blend(key, value);
  } else if (key == "mode") {
    c.mode = train_mode_from_string(value);
  } else if (key == "length_penalty_enabled") {
    c.length_penalty_enabled = parse_bool(key, value);
  } else if (key == "optimizer.kind") {
    c.optimizer.kind = optimizer_kind_from_string(value);
  } else if (key == "optimizer.learning_rate") {
    c.optimizer.learning_rate = parse_double(key, value);
  } else if (key == "optimizer.beta1") {
    c.optimizer.beta1 = parse_double(key, value);
  } else if (key == "optimizer.beta2") {
    c.optimizer.beta2 = parse_double(key, value);
  } else if (key == "optimizer.eps") {
    c.optimizer.eps = parse_double(key, value);
  } else if (key == "max_steps") {
    c.max_steps = parse_i64(key, value);
  } else if (key == "seed") {
    c.seed = parse_u64(key, value);
  } else if (key == "kl_coefficient") {
    c.kl_coefficient = parse_double(key, value);
  } else if (key == "judge.backend") {
    if (value == "mock") {
      c.judge_backend = JudgeBackend::mock;
    } else if (value == "http") {
      c.judge_backend = JudgeBackend::http;
    } else {
      throw ConfigError("judge.backend: expected \"mock\" or \"http\"");
    }
  } else if (key == "judge.url") {
    c.judge_url = value;
  } else if (key == "judge.length_bias_scale") {
    c.judge.length_bias_scale = parse_double(key, value);
  } else if (key == "judge.length_bias_cap") {
    c.judge.length_bias_cap = parse_double(key, value);
  } else if (key == "judge.rubric_weight") {
    c.judge.rubric_weight = parse_double(key, value);
  } else if (key == "judge.floor") {
    c.judge.floor = parse_double(key, value);
  } else if (key == "judge.noise_std") {
    c.judge.noise_std = parse_double(key, value);
  } else if (key == "judge.seed") {
    c.judge.seed = parse_u64(key, value);
  } else if (key == "verifier.backend") {
    if (value == "exact") {
      c.verifier_backend = VerifierBackend::exact;
    } else if (value == "http") {
      c.verifier_backend = VerifierBackend::http;
    } else {
      throw ConfigError("verifier.backend: expected \"exact\" or \"http\"");
    }
  } else if (key == "verifier.url") {
    c.verifier_url = value;
  } else if (key == "verifier.normalize_whitespace") {
    c.verifier_normalize_ws = parse_bool(key, value);
  } else if (key == "http.timeout_ms") {
    c.http_timeout_ms = parse_int(key, value);
  } else if (key == "http.retries") {
    c.http_retries = parse_int(key, value);
  } else if (key == "difficulty.min_terms") {
    c.difficulty.min_terms = parse_int(key, value);
  } else if (key == "difficulty.max_terms") {
    c.difficulty.max_terms = parse_int(key, value);
  } else if (key == "difficulty.modulus") {
    c.difficulty.modulus = parse_int(key, value);
  } else if (key == "difficulty.allow_mul") {
    c.difficulty.allow_mul = parse_bool(key, value);
  } else if (key == "dataset.path") {
    c.dataset_path = value;
  } else if (key == "dataset.cycle") {
    c.dataset_cycle = parse_bool(key, value);
  } else if (key == "dataset.min_prompt_tokens") {
    c.min_prompt_tokens = parse_int(key, value);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_i64(key, value);
  } else if (key == "eval_every") {
    c.eval_every = parse_i64(key, value);
  } else if (key == "eval_size") {
    c.eval_size = parse_int(key, value);
  } else if (key == "stop_answer_tokens") {
    c.stop_answer_tokens = parse_i64(key, value);
  } else if (key == "workers") {
    const int w = parse_int(key, value);
    if (w < 1) throw ConfigError("workers: must be >= 1");
    c.workers = static_cast<unsigned>(w);
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError(what); };

  if (batch_size < 1) bad("batch_size: must be >= 1");
  if (group_size < 2) bad("group_size: must be >= 2 (group statistics need G >= 2)");
  if (mini_batch_size < 0) bad("mini_batch_size: must be >= 0");
  if (mini_batch_size > 0 && batch_size % mini_batch_size != 0) {
    bad("mini_batch_size: must divide batch_size");
  }
  if (max_steps < 0) bad("max_steps: must be >= 0");
  if (kl_coefficient != 0.0) {
    bad("kl_coefficient: pinned to 0 in this implementation (the KL term is removed)");
  }

  if (curriculum.empty()) bad("curriculum: must have at least one stage");
  if (curriculum.front().step != 0) bad("curriculum: first stage must start at step 0");
  for (std::size_t i = 0; i < curriculum.size(); ++i) {
    if (curriculum[i].window < 1) bad("curriculum: windows must be >= 1");
    if (i > 0) {
      if (curriculum[i].step <= curriculum[i - 1].step) {
        bad("curriculum: steps must be strictly increasing");
      }
      if (curriculum[i].window < curriculum[i - 1].window) {
        bad("curriculum: windows must be non-decreasing");
      }
    }
  }

  {
    SamplingParams p;
    p.temperature = temperature;
    p.top_p = top_p;
    p.max_new_tokens = curriculum.front().window;
    p.validate();
  }

  if (context_window < 1) bad("policy.context_window: must be >= 1");
  if (embed_dim < 1) bad("policy.embed_dim: must be >= 1");
  if (hidden_dim < 1) bad("policy.hidden_dim: must be >= 1");
  if (tabular_order < 1 || tabular_order > 4) bad("policy.tabular_order: must lie in [1, 4]");

  reward.validate();
  clip.validate();
  optimizer.validate();
  blend.validate();
  difficulty.validate();
  if (base_policy_enabled) base_policy.validate();
  if (judge_backend == JudgeBackend::mock) {
    judge.validate();
  } else if (judge_url.empty()) {
    bad("judge.url: required when judge.backend is \"http\"");
  }
  if (verifier_backend == VerifierBackend::http && verifier_url.empty()) {
    bad("verifier.url: required when verifier.backend is \"http\"");
  }
  if (http_timeout_ms < 1) bad("http.timeout_ms: must be >= 1");
  if (http_retries < 0) bad("http.retries: must be >= 0");
  if (min_prompt_tokens < 0) bad("dataset.min_prompt_tokens: must be >= 0");
  if (checkpoint_every < 0) bad("checkpoint_every: must be >= 0");
  if (eval_every < 0) bad("eval_every: must be >= 0");
  if (eval_size < 1) bad("eval_size: must be >= 1");
  if (stop_answer_tokens < 0) bad("stop_answer_tokens: must be >= 0");
  if (workers < 1) bad("workers: must be >= 1");
  if (vocab != "desk" && vocab != "ascii") bad("vocab: expected \"desk\" or \"ascii\"");
  if (chat_template != "bare" && chat_template != "standard") {
    bad("chat_template: expected \"bare\" or \"standard\"");
  }
}

std::string TrainConfig::canonical() const {
  auto kv = to_kv(*this);
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(canonical()); }

std::string TrainConfig::to_json() const {
  auto kv = to_kv(*this);
  std::sort(kv.begin(), kv.end());
  nlohmann::ordered_json j;
  for (const auto& [key, value] : kv) j[key] = value;
  return j.dump(2);
}

TrainConfig TrainConfig::desk_profile() {
  TrainConfig c;
  c.profile = "desk";
  c.blend.weights = {{"math", 0.6}, {"chat", 0.4}};
  c.curriculum = {{0, 24}, {200, 32}, {400, 48}, {700, 64}, {1000, 96}, {1400, 128}};
  c.reward.lambda = 1.0 / 256.0;
  c.reward.l_max = 48;
  c.reward.l_cache = 36;
  c.reward.l_min_prime = 16;
  c.reward.l_max_prime = 64;
  c.judge.length_bias_scale = 24.0;
  c.judge.length_bias_cap = 2.0;
  c.judge.rubric_weight = 2.0;
  c.judge.floor = -1.0;
  c.judge.noise_std = 0.25;
  c.judge.seed = 7;
  c.eval_every = 50;
  c.eval_size = 200;
  return c;
}

TrainConfig TrainConfig::paper_profile() {
  TrainConfig c;
  c.profile = "paper";
  c.vocab = "ascii";
  c.chat_template = "standard";
  c.context_window = 64;
  c.embed_dim = 16;
  c.hidden_dim = 64;
  c.batch_size = 128;
  c.mini_batch_size = 128;
  c.group_size = 16;
  c.blend = BlendSpec::paper_default();
  c.curriculum = {{0, 2048}, {140, 4096}, {280, 8192}, {420, 16384}, {560, 24576}};
  c.reward = RewardCoefficients{};  // full-scale constants
  c.optimizer.kind = OptimizerKind::adam;
  c.optimizer.learning_rate = 1e-6;
  c.max_steps = 700;
  c.judge.length_bias_scale = 2048.0;
  c.judge.length_bias_cap = 2.0;
  c.judge.noise_std = 0.5;
  c.judge.seed = 7;
  c.difficulty.min_terms = 3;
  c.difficulty.max_terms = 5;
  return c;
}

TrainConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config JSON must be an object");
    for (const auto& [key, value] : j.items()) {
      std::string raw;
      if (value.is_string()) {
        raw = value.get<std::string>();
      } else if (value.is_boolean()) {
        raw = value.get<bool>() ? "true" : "false";
      } else if (value.is_number()) {
        raw = value.dump();
      } else {
        throw ConfigError("config key \"" + key + "\" must be a scalar");
      }
      entries.emplace_back(key, std::move(raw));
    }
  } else {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.resize(hash_pos);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      }
      entries.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
  }

  TrainConfig config = TrainConfig::desk_profile();
  for (const auto& [key, value] : entries) {
    if (key == "profile") set_field(config, key, value);
  }
  for (const auto& [key, value] : entries) {
    if (key != "profile") set_field(config, key, value);
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
  set_field(config, trim(key), trim(value));
}

}  // namespace zrl
