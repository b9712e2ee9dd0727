#include "zrl/optim.hpp"

#include <cmath>

#include "json.hpp"
#include "zrl/errors.hpp"

namespace zrl {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer kind: " + std::string(s));
}

void OptimizerConfig::validate() const {
  // Zero is allowed: a no-op update is a legitimate debugging configuration.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer: learning_rate must be a non-negative real");
  }
  if (kind == OptimizerKind::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer: beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
  }
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t n_params)
    : config_(config) {
  config_.validate();
  if (config_.kind == OptimizerKind::adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::ascend(std::span<double> params, std::span<const double> grad,
                       double lr_scale) {
  if (params.size() != grad.size()) throw ShapeMismatch("optimizer parameter/gradient size");
  const double lr = config_.learning_rate * lr_scale;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] += lr * grad[i];
    }
    ++steps_;
    return;
  }
  if (m_.size() != params.size()) throw ShapeMismatch("optimizer state size");
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] += lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

std::string Optimizer::state_to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "zrl-optimizer-v1";
  j["kind"] = std::string(to_string(config_.kind));
  j["steps"] = steps_;
  j["m"] = m_;
  j["v"] = v_;
  return j.dump();
}

void Optimizer::state_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("optimizer state is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "zrl-optimizer-v1") {
      throw CheckpointError("unsupported optimizer state format");
    }
    if (j.at("kind").get<std::string>() != to_string(config_.kind)) {
      throw CheckpointError("optimizer kind mismatch");
    }
    steps_ = j.at("steps").get<std::int64_t>();
    auto m = j.at("m").get<std::vector<double>>();
    auto v = j.at("v").get<std::vector<double>>();
    if (config_.kind == OptimizerKind::adam &&
        (m.size() != m_.size() || v.size() != v_.size())) {
      throw CheckpointError("optimizer state size mismatch");
    }
    m_ = std::move(m);
    v_ = std::move(v);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("optimizer state missing field: ") + e.what());
  }
}

}  // namespace zrl
