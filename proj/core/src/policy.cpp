#include "zrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "zrl/errors.hpp"

namespace zrl {

std::string_view to_string(PolicyKind kind) {
  return kind == PolicyKind::tabular_ngram ? "tabular_ngram" : "mlp";
}

void SamplingParams::validate() const {
  if (!greedy && (!(temperature > 0.0) || !std::isfinite(temperature))) {
    throw ConfigError("sampling: temperature must be a positive real");
  }
  if (!(top_p > 0.0) || top_p > 1.0) {
    throw ConfigError("sampling: top_p must lie in (0, 1]");
  }
  if (max_new_tokens < 1) {
    throw ConfigError("sampling: max_new_tokens must be >= 1");
  }
}

double log_sum_exp(std::span<const double> logits) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : logits) hi = std::max(hi, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

void softmax(std::span<const double> logits, std::span<double> out) {
  if (out.size() != logits.size()) throw ShapeMismatch("softmax buffer size");
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : logits) hi = std::max(hi, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

void Policy::next_logprobs(std::span<const Token> prefix, std::span<double> out) const {
  logits(prefix, out);
  const double lse = log_sum_exp(out);
  for (double& v : out) v -= lse;
}

void Policy::response_logprobs(std::span<const Token> prompt,
                               std::span<const Token> response,
                               std::span<double> out) const {
  if (out.size() != response.size()) {
    throw ShapeMismatch("response_logprobs output size");
  }
  const int v = vocab_size();
  std::vector<Token> prefix(prompt.begin(), prompt.end());
  prefix.reserve(prompt.size() + response.size());
  std::vector<double> scratch(static_cast<std::size_t>(v));
  for (std::size_t t = 0; t < response.size(); ++t) {
    const Token tok = response[t];
    if (tok < 0 || tok >= v) throw UnknownToken("response token out of vocabulary");
    logits(prefix, scratch);
    out[t] = scratch[static_cast<std::size_t>(tok)] - log_sum_exp(scratch);
    prefix.push_back(tok);
  }
}

Rollout Policy::sample(std::span<const Token> prompt, const SamplingParams& p,
                       Stream& stream) const {
  p.validate();
  const int v = vocab_size();
  Rollout out;
  std::vector<Token> prefix(prompt.begin(), prompt.end());
  prefix.reserve(prompt.size() + static_cast<std::size_t>(p.max_new_tokens));
  std::vector<double> raw(static_cast<std::size_t>(v));
  std::vector<double> probs(static_cast<std::size_t>(v));
  std::vector<int> order(static_cast<std::size_t>(v));

  for (int step = 0; step < p.max_new_tokens; ++step) {
    logits(prefix, raw);
    const double lse = log_sum_exp(raw);
    // A non-finite normalizer means the parameters have exploded; surface it
    // as the error the training loop's rollback protocol understands instead
    // of sampling garbage tokens.
    if (!std::isfinite(lse)) throw NonFinite("sampling distribution is not finite");

    int chosen;
    if (p.greedy) {
      chosen = 0;
      for (int i = 1; i < v; ++i) {
        if (raw[static_cast<std::size_t>(i)] > raw[static_cast<std::size_t>(chosen)]) {
          chosen = i;
        }
      }
    } else {
      if (p.temperature == 1.0) {
        softmax(raw, probs);
      } else {
        for (int i = 0; i < v; ++i) {
          probs[static_cast<std::size_t>(i)] = raw[static_cast<std::size_t>(i)] / p.temperature;
        }
        softmax(probs, probs);
      }
      // Nucleus truncation: keep the smallest high-probability set reaching
      // top_p (ties resolved toward lower token ids), then renormalize.
      double kept_mass = 1.0;
      if (p.top_p < 1.0) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        });
        double cum = 0.0;
        std::size_t kept = 0;
        while (kept < order.size()) {
          cum += probs[static_cast<std::size_t>(order[kept])];
          ++kept;
          if (cum >= p.top_p) break;
        }
        kept_mass = cum;
        for (std::size_t i = kept; i < order.size(); ++i) {
          probs[static_cast<std::size_t>(order[i])] = 0.0;
        }
      }
      const double u = stream.next_double() * kept_mass;
      double cum = 0.0;
      chosen = -1;
      for (int i = 0; i < v; ++i) {
        cum += probs[static_cast<std::size_t>(i)];
        if (u < cum) {
          chosen = i;
          break;
        }
      }
      if (chosen < 0) {
        // Rounding pushed u past the final partial sum; take the last
        // surviving token.
        for (int i = v - 1; i >= 0; --i) {
          if (probs[static_cast<std::size_t>(i)] > 0.0) {
            chosen = i;
            break;
          }
        }
      }
    }

    out.tokens.push_back(static_cast<Token>(chosen));
    out.logprobs.push_back(raw[static_cast<std::size_t>(chosen)] - lse);
    prefix.push_back(static_cast<Token>(chosen));
    if (chosen == Vocab::kEos) {
      out.ends_with_eos = true;
      break;
    }
  }
  return out;
}

std::vector<double> Policy::score_gradient(std::span<const Token> prefix,
                                           Token target) const {
  std::vector<double> grad(param_count(), 0.0);
  const Token response[1] = {target};
  const double weight[1] = {1.0};
  add_weighted_score_gradients(prefix, response, weight, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Tabular n-gram

TabularPolicy::TabularPolicy(int vocab_size, int order)
    : vocab_(vocab_size), order_(order) {
  if (vocab_size < 2) throw ConfigError("tabular policy: vocab_size must be >= 2");
  if (order < 1 || order > 4) throw ConfigError("tabular policy: order must be in [1, 4]");
  std::size_t rows = 1;
  for (int i = 0; i < order; ++i) rows *= static_cast<std::size_t>(vocab_size) + 1;
  params_.assign(rows * static_cast<std::size_t>(vocab_size), 0.0);
}

std::size_t TabularPolicy::row_offset(std::span<const Token> prefix) const {
  const std::size_t base = static_cast<std::size_t>(vocab_) + 1;
  std::size_t idx = 0;
  for (int j = order_; j >= 1; --j) {
    std::size_t id;
    if (prefix.size() >= static_cast<std::size_t>(j)) {
      const Token tok = prefix[prefix.size() - static_cast<std::size_t>(j)];
      if (tok < 0 || tok >= vocab_) throw UnknownToken("prefix token out of vocabulary");
      id = static_cast<std::size_t>(tok);
    } else {
      id = static_cast<std::size_t>(vocab_);  // pad
    }
    idx = idx * base + id;
  }
  return idx * static_cast<std::size_t>(vocab_);
}

void TabularPolicy::logits(std::span<const Token> prefix, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(vocab_)) {
    throw ShapeMismatch("logits buffer size");
  }
  const std::size_t off = row_offset(prefix);
  std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(off),
              static_cast<std::size_t>(vocab_), out.begin());
}

std::unique_ptr<Policy> TabularPolicy::clone() const {
  return std::make_unique<TabularPolicy>(*this);
}

void TabularPolicy::add_weighted_score_gradients(std::span<const Token> prompt,
                                                 std::span<const Token> response,
                                                 std::span<const double> weights,
                                                 std::span<double> grad) const {
  if (weights.size() != response.size()) throw ShapeMismatch("weights size");
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient size");
  std::vector<Token> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  std::vector<double> probs(static_cast<std::size_t>(vocab_));
  const std::size_t pl = prompt.size();
  for (std::size_t t = 0; t < response.size(); ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    const Token tok = response[t];
    if (tok < 0 || tok >= vocab_) throw UnknownToken("response token out of vocabulary");
    const auto prefix = std::span<const Token>(seq).first(pl + t);
    const std::size_t off = row_offset(prefix);
    softmax(std::span<const double>(params_).subspan(off, static_cast<std::size_t>(vocab_)),
            probs);
    for (int i = 0; i < vocab_; ++i) {
      grad[off + static_cast<std::size_t>(i)] -= w * probs[static_cast<std::size_t>(i)];
    }
    grad[off + static_cast<std::size_t>(tok)] += w;
  }
}

// ---------------------------------------------------------------------------
// MLP

namespace {

struct MlpOffsets {
  std::size_t embed, wh, bh, wo, bo, total;
};

MlpOffsets mlp_offsets(int v, int w, int e, int h) {
  MlpOffsets o{};
  const auto sv = static_cast<std::size_t>(v);
  const auto sw = static_cast<std::size_t>(w);
  const auto se = static_cast<std::size_t>(e);
  const auto sh = static_cast<std::size_t>(h);
  o.embed = 0;
  o.wh = (sv + 1) * se;
  o.bh = o.wh + sh * sw * se;
  o.wo = o.bh + sh;
  o.bo = o.wo + sv * sh;
  o.total = o.bo + sv;
  return o;
}

}  // namespace

MlpPolicy::MlpPolicy(int vocab_size, int context_window, int embed_dim, int hidden_dim)
    : vocab_(vocab_size), window_(context_window), embed_(embed_dim), hidden_(hidden_dim) {
  if (vocab_size < 2) throw ConfigError("mlp policy: vocab_size must be >= 2");
  if (context_window < 1) throw ConfigError("mlp policy: context_window must be >= 1");
  if (embed_dim < 1) throw ConfigError("mlp policy: embed_dim must be >= 1");
  if (hidden_dim < 1) throw ConfigError("mlp policy: hidden_dim must be >= 1");
  params_.assign(mlp_offsets(vocab_, window_, embed_, hidden_).total, 0.0);
}

void MlpPolicy::context_ids(std::span<const Token> prefix, std::span<int> out) const {
  const auto n = static_cast<std::ptrdiff_t>(prefix.size());
  for (int j = 0; j < window_; ++j) {
    const std::ptrdiff_t pos = n - window_ + j;
    if (pos < 0) {
      out[static_cast<std::size_t>(j)] = vocab_;  // pad
    } else {
      const Token tok = prefix[static_cast<std::size_t>(pos)];
      if (tok < 0 || tok >= vocab_) throw UnknownToken("prefix token out of vocabulary");
      out[static_cast<std::size_t>(j)] = tok;
    }
  }
}

void MlpPolicy::forward(std::span<const int> ctx, std::span<double> hidden,
                        std::span<double> out_logits) const {
  const MlpOffsets off = mlp_offsets(vocab_, window_, embed_, hidden_);
  const double* embed = params_.data() + off.embed;
  const double* wh = params_.data() + off.wh;
  const double* bh = params_.data() + off.bh;
  const double* wo = params_.data() + off.wo;
  const double* bo = params_.data() + off.bo;
  const std::size_t in_dim = static_cast<std::size_t>(window_) * static_cast<std::size_t>(embed_);

  for (int i = 0; i < hidden_; ++i) {
    double acc = bh[i];
    const double* row = wh + static_cast<std::size_t>(i) * in_dim;
    for (int j = 0; j < window_; ++j) {
      const double* emb = embed + static_cast<std::size_t>(ctx[static_cast<std::size_t>(j)]) *
                                      static_cast<std::size_t>(embed_);
      const double* wrow = row + static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_);
      for (int e = 0; e < embed_; ++e) acc += wrow[e] * emb[e];
    }
    hidden[static_cast<std::size_t>(i)] = std::tanh(acc);
  }
  for (int v = 0; v < vocab_; ++v) {
    double acc = bo[v];
    const double* row = wo + static_cast<std::size_t>(v) * static_cast<std::size_t>(hidden_);
    for (int i = 0; i < hidden_; ++i) acc += row[i] * hidden[static_cast<std::size_t>(i)];
    out_logits[static_cast<std::size_t>(v)] = acc;
  }
}

void MlpPolicy::logits(std::span<const Token> prefix, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(vocab_)) {
    throw ShapeMismatch("logits buffer size");
  }
  std::vector<int> ctx(static_cast<std::size_t>(window_));
  std::vector<double> hidden(static_cast<std::size_t>(hidden_));
  context_ids(prefix, ctx);
  forward(ctx, hidden, out);
}

std::unique_ptr<Policy> MlpPolicy::clone() const {
  return std::make_unique<MlpPolicy>(*this);
}

void MlpPolicy::randomize(Stream& stream, double scale) {
  for (double& p : params_) p = scale * stream.next_gaussian();
}

void MlpPolicy::add_weighted_score_gradients(std::span<const Token> prompt,
                                             std::span<const Token> response,
                                             std::span<const double> weights,
                                             std::span<double> grad) const {
  if (weights.size() != response.size()) throw ShapeMismatch("weights size");
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient size");
  const MlpOffsets off = mlp_offsets(vocab_, window_, embed_, hidden_);
  const double* embed = params_.data() + off.embed;
  const double* wh = params_.data() + off.wh;
  const double* wo = params_.data() + off.wo;
  const std::size_t in_dim = static_cast<std::size_t>(window_) * static_cast<std::size_t>(embed_);

  std::vector<Token> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  std::vector<int> ctx(static_cast<std::size_t>(window_));
  std::vector<double> hidden(static_cast<std::size_t>(hidden_));
  std::vector<double> lg(static_cast<std::size_t>(vocab_));
  std::vector<double> dlogits(static_cast<std::size_t>(vocab_));
  std::vector<double> dpre(static_cast<std::size_t>(hidden_));
  const std::size_t pl = prompt.size();

  for (std::size_t t = 0; t < response.size(); ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    const Token tok = response[t];
    if (tok < 0 || tok >= vocab_) throw UnknownToken("response token out of vocabulary");
    context_ids(std::span<const Token>(seq).first(pl + t), ctx);
    forward(ctx, hidden, lg);
    softmax(lg, dlogits);  // holds probs for a moment
    for (int v = 0; v < vocab_; ++v) {
      dlogits[static_cast<std::size_t>(v)] =
          w * ((v == tok ? 1.0 : 0.0) - dlogits[static_cast<std::size_t>(v)]);
    }

    // Readout layer.
    for (int v = 0; v < vocab_; ++v) {
      const double dv = dlogits[static_cast<std::size_t>(v)];
      if (dv == 0.0) continue;
      double* grow = grad.data() + off.wo +
                     static_cast<std::size_t>(v) * static_cast<std::size_t>(hidden_);
      for (int i = 0; i < hidden_; ++i) grow[i] += dv * hidden[static_cast<std::size_t>(i)];
      grad[off.bo + static_cast<std::size_t>(v)] += dv;
    }

    // Hidden layer.
    for (int i = 0; i < hidden_; ++i) {
      double dh = 0.0;
      for (int v = 0; v < vocab_; ++v) {
        dh += wo[static_cast<std::size_t>(v) * static_cast<std::size_t>(hidden_) +
                 static_cast<std::size_t>(i)] *
              dlogits[static_cast<std::size_t>(v)];
      }
      const double hv = hidden[static_cast<std::size_t>(i)];
      dpre[static_cast<std::size_t>(i)] = dh * (1.0 - hv * hv);
    }
    for (int i = 0; i < hidden_; ++i) {
      const double dp = dpre[static_cast<std::size_t>(i)];
      if (dp == 0.0) continue;
      double* grow = grad.data() + off.wh + static_cast<std::size_t>(i) * in_dim;
      const double* wrow = wh + static_cast<std::size_t>(i) * in_dim;
      for (int j = 0; j < window_; ++j) {
        const std::size_t cid = static_cast<std::size_t>(ctx[static_cast<std::size_t>(j)]);
        const double* emb = embed + cid * static_cast<std::size_t>(embed_);
        double* gemb = grad.data() + off.embed + cid * static_cast<std::size_t>(embed_);
        double* gw = grow + static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_);
        const double* wr = wrow + static_cast<std::size_t>(j) * static_cast<std::size_t>(embed_);
        for (int e = 0; e < embed_; ++e) {
          gw[e] += dp * emb[e];
          gemb[e] += dp * wr[e];
        }
      }
      grad[off.bh + static_cast<std::size_t>(i)] += dp;
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {
constexpr const char* kPolicyFormat = "zrl-policy-v1";
}

std::string policy_to_json(const Policy& policy) {
  nlohmann::ordered_json j;
  j["format"] = kPolicyFormat;
  j["kind"] = std::string(to_string(policy.kind()));
  j["vocab_size"] = policy.vocab_size();
  if (policy.kind() == PolicyKind::tabular_ngram) {
    j["order"] = static_cast<const TabularPolicy&>(policy).order();
  } else {
    const auto& mlp = static_cast<const MlpPolicy&>(policy);
    j["context_window"] = mlp.context_window();
    j["embed_dim"] = mlp.embed_dim();
    j["hidden_dim"] = mlp.hidden_dim();
  }
  const auto params = policy.params();
  j["params"] = std::vector<double>(params.begin(), params.end());
  return j.dump();
}

std::unique_ptr<Policy> policy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("policy checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kPolicyFormat) {
      throw CheckpointError("unsupported policy checkpoint format");
    }
    const auto kind = j.at("kind").get<std::string>();
    const int vocab = j.at("vocab_size").get<int>();
    std::unique_ptr<Policy> policy;
    if (kind == "tabular_ngram") {
      policy = std::make_unique<TabularPolicy>(vocab, j.at("order").get<int>());
    } else if (kind == "mlp") {
      policy = std::make_unique<MlpPolicy>(vocab, j.at("context_window").get<int>(),
                                           j.at("embed_dim").get<int>(),
                                           j.at("hidden_dim").get<int>());
    } else {
      throw CheckpointError("unknown policy kind: " + kind);
    }
    const auto& params = j.at("params");
    if (!params.is_array() || params.size() != policy->param_count()) {
      throw CheckpointError("policy checkpoint parameter count mismatch");
    }
    auto dst = policy->mutable_params();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = params[i].get<double>();
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("policy checkpoint missing field: ") + e.what());
  }
}

}  // namespace zrl
