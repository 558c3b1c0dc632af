#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nstlab/data.hpp"
#include "nstlab/mlp.hpp"
#include "nstlab/rng.hpp"
#include "nstlab/tensor.hpp"

namespace nst {

/// Probability row produced by augmentation-averaged prediction plus
/// sharpening; entries nonnegative, sum 1.
struct GuessedLabel {
  std::vector<double> q;
};

struct MixConfig {
  double alpha = 0.75;        // MixUp Beta parameter
  double temperature = 0.5;   // sharpening temperature
  std::size_t k_augment = 2;  // augmentations per unlabeled example

  bool operator==(const MixConfig&) const = default;
};

struct LossWeights {
  double lambda = 1.0;    // pair-consistency weight on the plain nullspace loss
  double lambda_u = 75.0; // unlabeled (consistency) weight
  double lambda_e = 1.0;  // nullspace weight in the combined loss

  bool operator==(const LossWeights&) const = default;
};

Tensor one_hot(std::span<const int> labels, std::size_t k);

/// Mean over rows of -sum(target * log(prob)); probabilities are clamped
/// below at 1e-12 before the log.
Tensor cross_entropy(const Tensor& probs, const Tensor& targets);
Tensor cross_entropy(const Tensor& probs, std::span<const int> classes);

/// Squared Euclidean distance over all entries. Zero iff the inputs are
/// equal; for probability rows bounded by 2.
Tensor pair_consistency_loss(const Tensor& p, const Tensor& q);

/// Cross-entropy on the labeled batch plus lambda times the mean pair
/// consistency over within-class prediction pairs. With lambda = 0 the pair
/// branch is not built and the loss is exactly the supervised one.
Tensor nst_loss(const MlpParams& model, const Tensor& x_labeled, std::span<const int> y_labeled,
                const Tensor& x_pair_left, const Tensor& x_pair_right, double lambda);

/// p_i^(1/T) / sum_j p_j^(1/T), rowwise. Differentiable when `probs` is
/// graph-attached. T = 1 is the identity up to roundoff.
Tensor sharpen(const Tensor& probs, double temperature);

/// Sharpened average of the model's predictions over K augmentations of one
/// example. The returned row is detached from the graph.
GuessedLabel guess_label(const MlpParams& model, std::span<const double> example,
                         std::size_t k_augment, const AugmentPolicy& policy, double temperature,
                         Rng& rng);

struct MixedExample {
  std::vector<double> x;
  std::vector<double> p;
  double lambda_prime;  // realized interpolation weight, always >= 0.5
};

/// Draws lambda ~ Beta(alpha, alpha), keeps lambda' = max(lambda, 1-lambda)
/// so the result stays dominated by the first argument.
MixedExample mixup(std::span<const double> x1, std::span<const double> p1,
                   std::span<const double> x2, std::span<const double> p2, double alpha, Rng& rng);

/// Same interpolation with the Beta draw supplied by the caller.
MixedExample mixup_with_lambda(std::span<const double> x1, std::span<const double> p1,
                               std::span<const double> x2, std::span<const double> p2,
                               double lambda);

/// Interpolated batch: mixed labeled examples with mixed label rows, and
/// mixed unlabeled examples with mixed guessed-label rows. All plain data.
struct MixedBatch {
  Tensor x_labeled;   // (B, d)
  Tensor y_labeled;   // (B, k) rows on the simplex
  Tensor x_unlabeled; // (K*U, d)
  Tensor q_unlabeled; // (K*U, k)
};

struct MixmatchBatchResult {
  MixedBatch mixed;
  /// Guessed labels of the pair members, recorded before any mixing. These
  /// stay attached to the differentiation graph so the nullspace term can
  /// tune the model through them.
  Tensor q_pair_left;   // (m, k)
  Tensor q_pair_right;  // (m, k)
};

/// One MixMatch round: augment labeled once and unlabeled K times, guess a
/// label per unlabeled example, record the per-pair guesses, then pool,
/// shuffle and MixUp everything back to labeled size B and unlabeled size
/// K*U (U = 2m pair members).
MixmatchBatchResult mixmatch_batch(const MlpParams& model, const Tensor& x_labeled,
                                   std::span<const int> y_labeled, const Tensor& x_pair_left,
                                   const Tensor& x_pair_right, const AugmentPolicy& policy,
                                   const MixConfig& config, Rng& augment_rng, Rng& mix_rng);

/// L_X: cross-entropy on the mixed labeled batch. L_U: mean squared distance
/// between predictions on mixed unlabeled inputs and their targets, divided
/// by the class count.
std::pair<Tensor, Tensor> mixmatch_losses(const MlpParams& model, const MixedBatch& mixed);

double combined_loss(double l_x, double l_u, double l_e, double lambda_u_effective,
                     double lambda_e);
Tensor combined_loss(const Tensor& l_x, const Tensor& l_u, const Tensor& l_e,
                     double lambda_u_effective, double lambda_e);

/// Mean over rows of the squared distance between predictions under two
/// independent augmentation draws.
Tensor pi_model_loss(const MlpParams& model, const Tensor& x_unlabeled,
                     const AugmentPolicy& policy, Rng& rng);

/// Confidence-gated self-training loss for one probability row: cross-entropy
/// against the hard argmax label when max prob exceeds the threshold, else 0.
double pseudo_label_loss(std::span<const double> probs, double threshold);

/// Batch composition of the gate above; mean over all rows (gated rows
/// contribute their cross-entropy, others zero).
Tensor pseudo_label_batch_loss(const MlpParams& model, const Tensor& x_unlabeled,
                               double threshold);

/// Squared Euclidean distance; the teacher tensor must be detached so no
/// gradient flows into it.
Tensor mean_teacher_loss(const Tensor& student_probs, const Tensor& teacher_probs);

/// Virtual adversarial loss: power iteration finds the perturbation
/// direction that most changes the prediction; returns the mean KL between
/// the (constant) clean prediction and the prediction at radius eps along
/// that direction. When `out_direction` is given it receives the final
/// row-normalized direction (n x d, unit rows).
Tensor vat_loss(const MlpParams& model, const Tensor& x, double xi, double eps, int n_power,
                Rng& rng, std::vector<double>* out_direction = nullptr);

}  // namespace nst
