#include "nstlab/losses.hpp"

#include <cmath>

namespace nst {

namespace {

constexpr double kProbFloor = 1e-12;

void check_probability_shapes(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::Dimension, std::string(op) + ": mismatched shapes");
  }
}

}  // namespace

Tensor one_hot(std::span<const int> labels, std::size_t k) {
  std::vector<double> out(labels.size() * k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error(ErrorKind::Contract, "one_hot: label " + std::to_string(y) + " outside 0.." +
                                           std::to_string(k - 1));
    }
    out[i * k + static_cast<std::size_t>(y)] = 1.0;
  }
  return Tensor::from({labels.size(), k}, std::move(out));
}

Tensor cross_entropy(const Tensor& probs, const Tensor& targets) {
  check_probability_shapes("cross_entropy", probs, targets);
  double inv_rows = 1.0 / static_cast<double>(probs.rows());
  return scalar_mul(sum(mul(targets, log(clamp_min(probs, kProbFloor)))), -inv_rows);
}

Tensor cross_entropy(const Tensor& probs, std::span<const int> classes) {
  if (classes.size() != probs.rows()) {
    throw Error(ErrorKind::Dimension, "cross_entropy: one class id per probability row required");
  }
  return cross_entropy(probs, one_hot(classes, probs.cols()));
}

Tensor pair_consistency_loss(const Tensor& p, const Tensor& q) {
  check_probability_shapes("pair_consistency_loss", p, q);
  return squared_l2_norm(sub(p, q));
}

Tensor nst_loss(const MlpParams& model, const Tensor& x_labeled, std::span<const int> y_labeled,
                const Tensor& x_pair_left, const Tensor& x_pair_right, double lambda) {
  if (!x_labeled.defined() || x_labeled.rows() == 0 || y_labeled.empty()) {
    throw Error(ErrorKind::Contract, "nst_loss: labeled batch must be nonempty");
  }
  Tensor supervised = cross_entropy(predict_proba(model, x_labeled), y_labeled);
  if (lambda == 0.0) return supervised;
  if (x_pair_left.shape() != x_pair_right.shape()) {
    throw Error(ErrorKind::Dimension, "nst_loss: pair batches must have equal shape");
  }
  std::size_t m = x_pair_left.rows();
  Tensor left = predict_proba(model, x_pair_left);
  Tensor right = predict_proba(model, x_pair_right);
  Tensor pair_mean = scalar_mul(pair_consistency_loss(left, right), 1.0 / static_cast<double>(m));
  return add(supervised, scalar_mul(pair_mean, lambda));
}

Tensor sharpen(const Tensor& probs, double temperature) {
  if (temperature <= 0.0) {
    throw Error(ErrorKind::Config, "sharpen: temperature must be positive");
  }
  // p^(1/T) renormalized == softmax(log(p) / T); reuses the stable softmax.
  return softmax(scalar_mul(log(clamp_min(probs, kProbFloor)), 1.0 / temperature));
}

namespace {

/// Attached guessed labels for a whole batch: sharpened mean prediction over
/// the given augmented views (all shaped (m, d)).
Tensor guess_labels_graph(const MlpParams& model, std::span<const Tensor> augmented_views,
                          double temperature) {
  Tensor acc = predict_proba(model, augmented_views[0]);
  for (std::size_t a = 1; a < augmented_views.size(); ++a) {
    acc = add(acc, predict_proba(model, augmented_views[a]));
  }
  Tensor avg = scalar_mul(acc, 1.0 / static_cast<double>(augmented_views.size()));
  return sharpen(avg, temperature);
}

}  // namespace

GuessedLabel guess_label(const MlpParams& model, std::span<const double> example,
                         std::size_t k_augment, const AugmentPolicy& policy, double temperature,
                         Rng& rng) {
  if (k_augment < 1) throw Error(ErrorKind::Config, "guess_label: need K >= 1");
  Tensor x = Tensor::from({1, example.size()}, {example.begin(), example.end()});
  std::vector<Tensor> views;
  views.reserve(k_augment);
  for (std::size_t a = 0; a < k_augment; ++a) views.push_back(augment(x, policy, rng));
  Tensor q = guess_labels_graph(model, views, temperature);
  return GuessedLabel{{q.values().begin(), q.values().end()}};
}

MixedExample mixup_with_lambda(std::span<const double> x1, std::span<const double> p1,
                               std::span<const double> x2, std::span<const double> p2,
                               double lambda) {
  if (x1.size() != x2.size() || p1.size() != p2.size()) {
    throw Error(ErrorKind::Dimension, "mixup: mismatched example or label sizes");
  }
  double lam_prime = std::max(lambda, 1.0 - lambda);
  MixedExample out;
  out.lambda_prime = lam_prime;
  out.x.resize(x1.size());
  out.p.resize(p1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) out.x[i] = lam_prime * x1[i] + (1.0 - lam_prime) * x2[i];
  for (std::size_t i = 0; i < p1.size(); ++i) out.p[i] = lam_prime * p1[i] + (1.0 - lam_prime) * p2[i];
  return out;
}

MixedExample mixup(std::span<const double> x1, std::span<const double> p1,
                   std::span<const double> x2, std::span<const double> p2, double alpha, Rng& rng) {
  if (alpha <= 0.0) throw Error(ErrorKind::Config, "mixup: alpha must be positive");
  return mixup_with_lambda(x1, p1, x2, p2, rng.beta(alpha, alpha));
}

MixmatchBatchResult mixmatch_batch(const MlpParams& model, const Tensor& x_labeled,
                                   std::span<const int> y_labeled, const Tensor& x_pair_left,
                                   const Tensor& x_pair_right, const AugmentPolicy& policy,
                                   const MixConfig& config, Rng& augment_rng, Rng& mix_rng) {
  if (config.alpha <= 0.0 || config.temperature <= 0.0 || config.k_augment < 1) {
    throw Error(ErrorKind::Config, "mixmatch_batch: invalid MixConfig");
  }
  if (x_pair_left.shape() != x_pair_right.shape()) {
    throw Error(ErrorKind::Contract, "mixmatch_batch: pair batches must have equal shape");
  }
  std::size_t batch = x_labeled.rows();
  std::size_t m = x_pair_left.rows();
  std::size_t d = x_labeled.cols();
  std::size_t k_classes = model.widths().back();
  std::size_t k_aug = config.k_augment;

  // 1. One augmentation per labeled example, K per unlabeled pair member.
  Tensor labeled_aug = augment(x_labeled, policy, augment_rng);
  std::vector<Tensor> left_views, right_views;
  for (std::size_t a = 0; a < k_aug; ++a) {
    left_views.push_back(augment(x_pair_left, policy, augment_rng));
    right_views.push_back(augment(x_pair_right, policy, augment_rng));
  }

  // 2. Guess one label per unlabeled example; keep the graph attachment for
  //    the nullspace term, use detached copies as MixUp targets.
  Tensor q_left = guess_labels_graph(model, left_views, config.temperature);
  Tensor q_right = guess_labels_graph(model, right_views, config.temperature);
  auto q_left_vals = q_left.values();
  auto q_right_vals = q_right.values();

  // 3. Pool in original order: labeled entries, then per augmentation round
  //    the left members followed by the right members.
  std::size_t pool_size = batch + k_aug * 2 * m;
  std::vector<std::vector<double>> pool_x(pool_size), pool_p(pool_size);
  Tensor y_rows = one_hot(y_labeled, k_classes);
  auto copy_row = [](std::span<const double> v, std::size_t row, std::size_t width) {
    return std::vector<double>(v.begin() + row * width, v.begin() + (row + 1) * width);
  };
  for (std::size_t i = 0; i < batch; ++i) {
    pool_x[i] = copy_row(labeled_aug.values(), i, d);
    pool_p[i] = copy_row(y_rows.values(), i, k_classes);
  }
  std::size_t cursor = batch;
  for (std::size_t a = 0; a < k_aug; ++a) {
    for (std::size_t j = 0; j < m; ++j, ++cursor) {
      pool_x[cursor] = copy_row(left_views[a].values(), j, d);
      pool_p[cursor] = copy_row(q_left_vals, j, k_classes);
    }
    for (std::size_t j = 0; j < m; ++j, ++cursor) {
      pool_x[cursor] = copy_row(right_views[a].values(), j, d);
      pool_p[cursor] = copy_row(q_right_vals, j, k_classes);
    }
  }

  // 4. Shuffle the pool, then MixUp each original-order entry against the
  //    shuffled entry at the same position.
  std::vector<std::size_t> perm = mix_rng.permutation(pool_size);
  std::vector<double> mixed_x(pool_size * d), mixed_p(pool_size * k_classes);
  for (std::size_t t = 0; t < pool_size; ++t) {
    MixedExample me = mixup(pool_x[t], pool_p[t], pool_x[perm[t]], pool_p[perm[t]], config.alpha,
                            mix_rng);
    std::copy(me.x.begin(), me.x.end(), mixed_x.begin() + t * d);
    std::copy(me.p.begin(), me.p.end(), mixed_p.begin() + t * k_classes);
  }

  MixmatchBatchResult out;
  std::size_t u_rows = k_aug * 2 * m;
  out.mixed.x_labeled = Tensor::from({batch, d}, {mixed_x.begin(), mixed_x.begin() + batch * d});
  out.mixed.y_labeled =
      Tensor::from({batch, k_classes}, {mixed_p.begin(), mixed_p.begin() + batch * k_classes});
  out.mixed.x_unlabeled = Tensor::from({u_rows, d}, {mixed_x.begin() + batch * d, mixed_x.end()});
  out.mixed.q_unlabeled =
      Tensor::from({u_rows, k_classes}, {mixed_p.begin() + batch * k_classes, mixed_p.end()});
  out.q_pair_left = q_left;
  out.q_pair_right = q_right;
  return out;
}

std::pair<Tensor, Tensor> mixmatch_losses(const MlpParams& model, const MixedBatch& mixed) {
  Tensor l_x = cross_entropy(predict_proba(model, mixed.x_labeled), mixed.y_labeled);
  Tensor preds = predict_proba(model, mixed.x_unlabeled);
  double norm = 1.0 / (static_cast<double>(preds.rows()) * static_cast<double>(preds.cols()));
  Tensor l_u = scalar_mul(squared_l2_norm(sub(preds, mixed.q_unlabeled)), norm);
  return {l_x, l_u};
}

double combined_loss(double l_x, double l_u, double l_e, double lambda_u_effective,
                     double lambda_e) {
  if (lambda_u_effective < 0.0 || lambda_e < 0.0) {
    throw Error(ErrorKind::Config, "combined_loss: weights must be nonnegative");
  }
  return l_x + lambda_u_effective * l_u + lambda_e * l_e;
}

Tensor combined_loss(const Tensor& l_x, const Tensor& l_u, const Tensor& l_e,
                     double lambda_u_effective, double lambda_e) {
  if (lambda_u_effective < 0.0 || lambda_e < 0.0) {
    throw Error(ErrorKind::Config, "combined_loss: weights must be nonnegative");
  }
  return add(l_x, add(scalar_mul(l_u, lambda_u_effective), scalar_mul(l_e, lambda_e)));
}

Tensor pi_model_loss(const MlpParams& model, const Tensor& x_unlabeled,
                     const AugmentPolicy& policy, Rng& rng) {
  Tensor first = augment(x_unlabeled, policy, rng);
  Tensor second = augment(x_unlabeled, policy, rng);
  Tensor p1 = predict_proba(model, first);
  Tensor p2 = predict_proba(model, second);
  return scalar_mul(pair_consistency_loss(p1, p2), 1.0 / static_cast<double>(x_unlabeled.rows()));
}

double pseudo_label_loss(std::span<const double> probs, double threshold) {
  if (threshold <= 0.0 || threshold > 1.0) {
    throw Error(ErrorKind::Config, "pseudo_label_loss: threshold must be in (0, 1]");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;  // ties keep the lowest index
  }
  if (!(probs[best] > threshold)) return 0.0;
  return -std::log(std::max(probs[best], kProbFloor));
}

Tensor pseudo_label_batch_loss(const MlpParams& model, const Tensor& x_unlabeled,
                               double threshold) {
  if (threshold <= 0.0 || threshold > 1.0) {
    throw Error(ErrorKind::Config, "pseudo_label_batch_loss: threshold must be in (0, 1]");
  }
  Tensor probs = predict_proba(model, x_unlabeled);
  std::size_t rows = probs.rows(), k = probs.cols();
  auto v = probs.values();
  std::vector<double> targets(rows * k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (v[r * k + c] > v[r * k + best]) best = c;
    if (v[r * k + best] > threshold) targets[r * k + best] = 1.0;
  }
  Tensor target_rows = Tensor::from({rows, k}, std::move(targets));
  return scalar_mul(sum(mul(target_rows, log(clamp_min(probs, kProbFloor)))),
                    -1.0 / static_cast<double>(rows));
}

Tensor mean_teacher_loss(const Tensor& student_probs, const Tensor& teacher_probs) {
  check_probability_shapes("mean_teacher_loss", student_probs, teacher_probs);
  return squared_l2_norm(sub(student_probs, teacher_probs));
}

namespace {

/// KL(p || q) summed per row and averaged over rows, as a graph scalar.
/// `p` and `log_p` are constants; `log_q` carries the gradient. When log_q
/// equals log_p bitwise the result is exactly zero.
Tensor kl_mean(const Tensor& p, const Tensor& log_p, const Tensor& log_q, std::size_t rows) {
  Tensor lhs = sum(mul(p, log_p));
  Tensor rhs = sum(mul(p, log_q));
  return scalar_mul(sub(lhs, rhs), 1.0 / static_cast<double>(rows));
}

void normalize_rows_or_keep(std::vector<double>& values, std::span<const double> fallback,
                            std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double norm2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) norm2 += values[r * cols + c] * values[r * cols + c];
    if (norm2 == 0.0) {
      // zero-gradient direction: keep the current unit vector
      for (std::size_t c = 0; c < cols; ++c) values[r * cols + c] = fallback[r * cols + c];
      continue;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t c = 0; c < cols; ++c) values[r * cols + c] *= inv;
  }
}

}  // namespace

Tensor vat_loss(const MlpParams& model, const Tensor& x, double xi, double eps, int n_power,
                Rng& rng, std::vector<double>* out_direction) {
  if (xi <= 0.0 || eps < 0.0 || n_power < 1) {
    throw Error(ErrorKind::Config, "vat_loss: need xi > 0, eps >= 0, n_power >= 1");
  }
  std::size_t rows = x.rows(), d = x.cols();

  // Clean prediction, detached: it is the fixed KL target.
  Tensor clean_logits = predict_logits(model, x);
  Tensor p = softmax(clean_logits).detach();
  Tensor log_p = log_softmax(clean_logits).detach();

  // Random unit start direction per row.
  std::vector<double> direction(rows * d);
  for (double& v : direction) v = rng.normal();
  {
    std::vector<double> zeros(rows * d, 0.0);
    for (std::size_t r = 0; r < rows; ++r) zeros[r * d] = 1.0;  // degenerate-draw fallback
    normalize_rows_or_keep(direction, zeros, rows, d);
  }

  for (int it = 0; it < n_power; ++it) {
    Tensor d_leaf = Tensor::param({rows, d}, direction);
    Tensor perturbed = add(x, scalar_mul(d_leaf, xi));
    Tensor log_q = log_softmax(predict_logits(model, perturbed));
    Tensor kl = kl_mean(p, log_p, log_q, rows);
    GradientMap grads = backward(kl, std::vector<Tensor>{d_leaf});
    auto g = grads.at(d_leaf.id()).values();
    std::vector<double> next(g.begin(), g.end());
    normalize_rows_or_keep(next, direction, rows, d);
    direction = std::move(next);
  }

  if (out_direction) *out_direction = direction;

  // Final radius-eps perturbation is a constant; gradient flows through the
  // model only.
  std::vector<double> adv(rows * d);
  auto xv = x.values();
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = xv[i] + eps * direction[i];
  Tensor log_q = log_softmax(predict_logits(model, Tensor::from({rows, d}, std::move(adv))));
  return kl_mean(p, log_p, log_q, rows);
}

}  // namespace nst
