#include "nstlab/trainer.hpp"

#include <chrono>
#include <cmath>

namespace nst {

Method method_from_name(const std::string& name) {
  if (name == "supervised") return Method::Supervised;
  if (name == "nst") return Method::Nst;
  if (name == "pi-model") return Method::PiModel;
  if (name == "mean-teacher") return Method::MeanTeacher;
  if (name == "pseudo-label") return Method::PseudoLabel;
  if (name == "vat") return Method::Vat;
  if (name == "mixmatch") return Method::MixMatch;
  if (name == "mixmatch-nst") return Method::MixMatchNst;
  throw Error(ErrorKind::Config, "unknown method \"" + name + "\"");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Supervised: return "supervised";
    case Method::Nst: return "nst";
    case Method::PiModel: return "pi-model";
    case Method::MeanTeacher: return "mean-teacher";
    case Method::PseudoLabel: return "pseudo-label";
    case Method::Vat: return "vat";
    case Method::MixMatch: return "mixmatch";
    case Method::MixMatchNst: return "mixmatch-nst";
  }
  return "?";
}

double rampup_weight(std::size_t step, std::size_t rampup_length, double lambda_max) {
  if (rampup_length == 0 || step >= rampup_length) return lambda_max;
  return lambda_max * static_cast<double>(step) / static_cast<double>(rampup_length);
}

EffectiveWeights effective_weights(const TrainConfig& config, std::size_t step) {
  return {rampup_weight(step, config.rampup_steps, config.weights.lambda_u),
          config.weights.lambda_e};
}

void optimizer_step(MlpParams& params, const GradientMap& grads, AdamState& state,
                    const OptimizerConfig& config) {
  std::vector<Tensor> leaves = params.all();
  if (state.first_moment.empty()) {
    state.first_moment.resize(leaves.size());
    state.second_moment.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      state.first_moment[i].assign(leaves[i].size(), 0.0);
      state.second_moment[i].assign(leaves[i].size(), 0.0);
    }
  }
  if (state.first_moment.size() != leaves.size()) {
    throw Error(ErrorKind::Dimension, "optimizer_step: state does not match parameter count");
  }
  state.step += 1;
  double t = static_cast<double>(state.step);
  double bc1 = 1.0 - std::pow(config.beta1, t);
  double bc2 = 1.0 - std::pow(config.beta2, t);
  double decay_factor = 1.0 - config.learning_rate * config.weight_decay;

  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto it = grads.find(leaves[i].id());
    if (it == grads.end()) {
      throw Error(ErrorKind::MissingLeaf,
                  "optimizer_step: no gradient for parameter node " + std::to_string(leaves[i].id()));
    }
    auto g = it->second.values();
    if (g.size() != leaves[i].size()) {
      throw Error(ErrorKind::Dimension, "optimizer_step: gradient shape mismatch");
    }
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto theta = leaves[i].values_mut();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      double m_hat = m[j] / bc1;
      double v_hat = v[j] / bc2;
      theta[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      theta[j] *= decay_factor;
    }
  }
}

double evaluate(const MlpParams& params, const Tensor& x, std::span<const int> y) {
  if (!x.defined() || x.rows() == 0 || y.empty()) {
    throw Error(ErrorKind::Contract, "evaluate: evaluation set must be nonempty");
  }
  Tensor probs = predict_proba(params, x);
  std::size_t rows = probs.rows(), k = probs.cols();
  auto v = probs.values();
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (v[r * k + c] > v[r * k + best]) best = c;
    if (static_cast<int>(best) != y[r]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(rows);
}

TrainerSession::TrainerSession(const TrainConfig& config, const PartialDataset& data)
    : config_(config),
      data_(&data),
      labeled_rng_(Rng(config.seed).stream("labeled")),
      unlabeled_rng_(Rng(config.seed).stream("unlabeled")),
      augment_rng_(Rng(config.seed).stream("augment")),
      mixup_rng_(Rng(config.seed).stream("mixup")),
      vat_rng_(Rng(config.seed).stream("vat")) {
  if (config.steps < 1 || config.batch_labeled < 1 || config.batch_unlabeled < 1) {
    throw Error(ErrorKind::Config, "train: steps and batch sizes must be >= 1");
  }
  if (data.labeled.empty()) {
    throw Error(ErrorKind::Config, "train: labeled set is empty");
  }
  bool needs_classes = config.method == Method::Nst || config.method == Method::MixMatchNst;
  if (needs_classes && data.classes.empty()) {
    throw Error(ErrorKind::Config,
                "train: method " + method_name(config.method) + " requires equivalence classes");
  }
  bool needs_unlabeled = config.method != Method::Supervised;
  if (needs_unlabeled && data.unlabeled.empty()) {
    throw Error(ErrorKind::Config,
                "train: method " + method_name(config.method) + " requires unlabeled examples");
  }

  ModelConfig mc;
  mc.widths.push_back(data.base.d());
  for (std::size_t w : config.hidden_widths) mc.widths.push_back(w);
  mc.widths.push_back(data.base.k);
  mc.seed = config.seed;
  Rng init_rng = Rng(config.seed).stream("init");
  params_ = init_params(mc, init_rng);
  if (config.method == Method::MeanTeacher) teacher_ = params_.clone();

  labeled_x_ = take_rows(data.base.features, data.labeled);
  labeled_y_ = take_labels(data.base.labels, data.labeled);
  if (!data.unlabeled.empty()) unlabeled_x_ = take_rows(data.base.features, data.unlabeled);
}

const MlpParams& TrainerSession::eval_params() const {
  return teacher_ ? *teacher_ : params_;
}

Tensor TrainerSession::compose_loss() {
  const PartialDataset& data = *data_;

  // Labeled batch for this step.
  std::size_t nl = data.labeled.size();
  Tensor xl;
  std::vector<int> yl;
  if (config_.batch_labeled >= nl) {
    xl = labeled_x_;
    yl = labeled_y_;
  } else {
    std::vector<std::size_t> pick = labeled_rng_.sample_without_replacement(nl, config_.batch_labeled);
    xl = take_rows(labeled_x_, pick);
    yl = take_labels(labeled_y_, pick);
  }

  double lambda_u_eff = effective_weights(config_, step_).lambda_u;

  auto uniform_unlabeled_batch = [&]() {
    std::size_t nu = data.unlabeled.size();
    std::size_t want = std::min(config_.batch_unlabeled, nu);
    std::vector<std::size_t> pick = unlabeled_rng_.sample_without_replacement(nu, want);
    return take_rows(unlabeled_x_, pick);
  };

  // For methods that consume equivalence pairs, the unlabeled batch is m
  // pairs (2m examples).
  auto pair_batch = [&]() {
    std::size_t m = std::max<std::size_t>(config_.batch_unlabeled / 2, 1);
    PairBatch pairs = sample_equiv_pairs(data, m, unlabeled_rng_);
    std::vector<std::size_t> left, right;
    left.reserve(pairs.pairs.size());
    right.reserve(pairs.pairs.size());
    for (auto [j, k] : pairs.pairs) {
      left.push_back(j);
      right.push_back(k);
    }
    return std::make_pair(take_rows(unlabeled_x_, left), take_rows(unlabeled_x_, right));
  };

  switch (config_.method) {
    case Method::Supervised:
      return cross_entropy(predict_proba(params_, xl), yl);

    case Method::Nst: {
      // The pair weight follows the same linear rampup as the unlabeled
      // consistency weights, so the few labeled anchors orient the decision
      // boundary before the pair term starts pulling predictions together.
      double lambda_eff = rampup_weight(step_, config_.rampup_steps, config_.weights.lambda);
      if (lambda_eff == 0.0) {
        // Exactly the supervised loss; the pair pool is never touched.
        return cross_entropy(predict_proba(params_, xl), yl);
      }
      auto [left, right] = pair_batch();
      return nst_loss(params_, xl, yl, left, right, lambda_eff);
    }

    case Method::PiModel: {
      Tensor supervised = cross_entropy(predict_proba(params_, xl), yl);
      if (lambda_u_eff == 0.0) return supervised;
      Tensor xu = uniform_unlabeled_batch();
      return add(supervised, scalar_mul(pi_model_loss(params_, xu, config_.augment, augment_rng_),
                                        lambda_u_eff));
    }

    case Method::MeanTeacher: {
      Tensor supervised = cross_entropy(predict_proba(params_, xl), yl);
      if (lambda_u_eff == 0.0) return supervised;
      Tensor xu = uniform_unlabeled_batch();
      Tensor student_view = augment(xu, config_.augment, augment_rng_);
      Tensor teacher_view = augment(xu, config_.augment, augment_rng_);
      Tensor teacher_probs = predict_proba(*teacher_, teacher_view).detach();
      Tensor consistency = mean_teacher_loss(predict_proba(params_, student_view), teacher_probs);
      double inv = 1.0 / static_cast<double>(xu.rows());
      return add(supervised, scalar_mul(consistency, lambda_u_eff * inv));
    }

    case Method::PseudoLabel: {
      Tensor supervised = cross_entropy(predict_proba(params_, xl), yl);
      if (lambda_u_eff == 0.0) return supervised;
      Tensor xu = uniform_unlabeled_batch();
      return add(supervised, scalar_mul(pseudo_label_batch_loss(params_, xu, config_.pseudo_threshold),
                                        lambda_u_eff));
    }

    case Method::Vat: {
      Tensor supervised = cross_entropy(predict_proba(params_, xl), yl);
      if (lambda_u_eff == 0.0) return supervised;
      Tensor xu = uniform_unlabeled_batch();
      Tensor vat = vat_loss(params_, xu, config_.vat.xi, config_.vat.eps, config_.vat.n_power,
                            vat_rng_);
      return add(supervised, scalar_mul(vat, lambda_u_eff));
    }

    case Method::MixMatch:
    case Method::MixMatchNst: {
      Tensor left, right;
      if (!data.classes.empty()) {
        std::tie(left, right) = pair_batch();
      } else {
        // Plain MixMatch without classes: split a uniform batch into halves.
        Tensor xu = uniform_unlabeled_batch();
        std::size_t u = xu.rows();
        if (u % 2 != 0) {
          throw Error(ErrorKind::Contract, "mixmatch: unlabeled batch size must be even");
        }
        std::vector<std::size_t> lo(u / 2), hi(u / 2);
        for (std::size_t i = 0; i < u / 2; ++i) {
          lo[i] = i;
          hi[i] = u / 2 + i;
        }
        left = take_rows(xu, lo);
        right = take_rows(xu, hi);
      }
      MixmatchBatchResult mm = mixmatch_batch(params_, xl, yl, left, right, config_.augment,
                                              config_.mix, augment_rng_, mixup_rng_);
      auto [l_x, l_u] = mixmatch_losses(params_, mm.mixed);
      Tensor loss = l_x;
      if (lambda_u_eff != 0.0) loss = add(loss, scalar_mul(l_u, lambda_u_eff));
      double lambda_e =
          config_.method == Method::MixMatchNst ? effective_weights(config_, step_).lambda_e : 0.0;
      if (lambda_e != 0.0) {
        // Same per-element normalization as L_U so lambda_e's scale does not
        // depend on the class count.
        double norm = 1.0 / (static_cast<double>(mm.q_pair_left.rows()) *
                             static_cast<double>(mm.q_pair_left.cols()));
        Tensor l_e = scalar_mul(pair_consistency_loss(mm.q_pair_left, mm.q_pair_right), norm);
        loss = add(loss, scalar_mul(l_e, lambda_e));
      }
      return loss;
    }
  }
  throw Error(ErrorKind::Contract, "train: unknown method");
}

void TrainerSession::step() {
  Tensor loss = compose_loss();
  last_loss_ = loss.item();
  std::vector<Tensor> leaves = params_.all();
  GradientMap grads = backward(loss, leaves);
  OptimizerConfig oc;
  oc.learning_rate = config_.learning_rate;
  oc.weight_decay = config_.weight_decay;
  optimizer_step(params_, grads, adam_, oc);
  if (teacher_) *teacher_ = ema_update(*teacher_, params_, config_.ema_decay);
  step_ += 1;
}

RunResult train(const TrainConfig& config, const PartialDataset& data, MlpParams* final_params) {
  auto t0 = std::chrono::steady_clock::now();
  TrainerSession session(config, data);
  const PartialDataset& d = data;

  Tensor val_x, test_x;
  std::vector<int> val_y, test_y;
  if (!d.validation.empty()) {
    val_x = take_rows(d.base.features, d.validation);
    val_y = take_labels(d.base.labels, d.validation);
  }
  if (d.test.empty()) {
    throw Error(ErrorKind::Config, "train: test set is empty");
  }
  test_x = take_rows(d.base.features, d.test);
  test_y = take_labels(d.base.labels, d.test);

  RunResult result;
  result.config = config;
  for (std::size_t i = 0; i < config.steps; ++i) {
    session.step();
    std::size_t done = i + 1;
    if (done % std::max<std::size_t>(config.eval_interval, 1) == 0 || done == config.steps) {
      EvalPoint point;
      point.step = done;
      point.train_loss = session.last_loss();
      if (!d.validation.empty()) {
        point.validation_error = evaluate(session.eval_params(), val_x, val_y);
      }
      point.test_error = evaluate(session.eval_params(), test_x, test_y);
      result.history.push_back(point);
    }
  }
  result.final_test_error = result.history.back().test_error;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (final_params) *final_params = session.eval_params().clone();
  return result;
}

}  // namespace nst
