#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zrl {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;  ///< throws ConfigError
};

/// Gradient-ascent optimizer over a flat parameter vector. sgd applies
/// params += lr * grad exactly; adam keeps bias-corrected moments.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t n_params);

  /// lr_scale multiplies the configured learning rate for this call only
  /// (the trainer's NonFinite recovery halves it mid-run).
  void ascend(std::span<double> params, std::span<const double> grad,
              double lr_scale = 1.0);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t step_count() const { return steps_; }

  /// Moment state round-trip for checkpoints; byte-stable.
  std::string state_to_json() const;
  void state_from_json(const std::string& text);  ///< throws CheckpointError

 private:
  OptimizerConfig config_;
  std::int64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace zrl
