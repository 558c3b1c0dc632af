#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nstlab/data.hpp"
#include "nstlab/losses.hpp"
#include "nstlab/mlp.hpp"

namespace nst {

enum class Method {
  Supervised,
  Nst,
  PiModel,
  MeanTeacher,
  PseudoLabel,
  Vat,
  MixMatch,
  MixMatchNst,
};

Method method_from_name(const std::string& name);
std::string method_name(Method method);

struct VatConfig {
  double xi = 1e-6;
  double eps = 1.0;
  int n_power = 1;

  bool operator==(const VatConfig&) const = default;
};

struct TrainConfig {
  Method method = Method::Supervised;
  std::vector<std::size_t> hidden_widths = {32, 32};
  double learning_rate = 3e-3;
  std::size_t steps = 500;
  std::size_t batch_labeled = 32;
  std::size_t batch_unlabeled = 32;
  LossWeights weights;
  MixConfig mix;
  std::size_t rampup_steps = 0;  // linear rampup length for lambda_u; 0 = constant
  double ema_decay = 0.99;
  double pseudo_threshold = 0.95;
  VatConfig vat;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 100;
  AugmentPolicy augment;

  bool operator==(const TrainConfig&) const = default;
};

/// lambda_max * min(1, step / rampup_length); rampup_length 0 means the
/// weight is constant from step 0. lambda_e never passes through this
/// schedule -- it is constant by contract.
double rampup_weight(std::size_t step, std::size_t rampup_length, double lambda_max);

/// The weights a training step actually applies: lambda_u ramped linearly,
/// lambda_e constant.
struct EffectiveWeights {
  double lambda_u = 0.0;
  double lambda_e = 0.0;
};
EffectiveWeights effective_weights(const TrainConfig& config, std::size_t step);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

/// Adam with bias correction followed by decoupled weight decay
/// theta <- theta * (1 - lr * wd). State initializes lazily to zeros.
void optimizer_step(MlpParams& params, const GradientMap& grads, AdamState& state,
                    const OptimizerConfig& config);

/// Fraction of rows whose argmax prediction differs from the label; argmax
/// ties break toward the lowest class index.
double evaluate(const MlpParams& params, const Tensor& x, std::span<const int> y);

struct EvalPoint {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::optional<double> validation_error;
  double test_error = 0.0;
};

struct RunResult {
  std::vector<EvalPoint> history;
  double final_test_error = 1.0;
  TrainConfig config;
  double seconds = 0.0;
};

/// Step-wise training driver. One session is single-threaded and fully
/// deterministic: every random draw comes from substreams of config.seed
/// (init / labeled / unlabeled / augment / mixup / vat), so methods that
/// share a stream consume identical draws under identical configs.
class TrainerSession {
public:
  TrainerSession(const TrainConfig& config, const PartialDataset& data);

  void step();
  std::size_t steps_done() const { return step_; }
  double last_loss() const { return last_loss_; }

  const MlpParams& params() const { return params_; }
  /// Parameters used for evaluation: the EMA teacher for mean-teacher, the
  /// student otherwise.
  const MlpParams& eval_params() const;

private:
  Tensor compose_loss();

  TrainConfig config_;
  const PartialDataset* data_;
  MlpParams params_;
  std::optional<MlpParams> teacher_;
  AdamState adam_;
  Rng labeled_rng_, unlabeled_rng_, augment_rng_, mixup_rng_, vat_rng_;
  std::size_t step_ = 0;
  double last_loss_ = 0.0;
  Tensor labeled_x_;          // cached gathers of the split
  std::vector<int> labeled_y_;
  Tensor unlabeled_x_;
};

/// Full training run with periodic evaluation. When `final_params` is given
/// it receives the evaluation parameters at the last step.
RunResult train(const TrainConfig& config, const PartialDataset& data,
                MlpParams* final_params = nullptr);

}  // namespace nst
