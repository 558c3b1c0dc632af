#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nstlab/rng.hpp"
#include "nstlab/tensor.hpp"

namespace nst {

struct Dataset {
  Tensor features;           // (n, d), leaf tensor
  std::vector<int> labels;   // class ids in 0..k-1
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::size_t n() const { return features.defined() ? features.shape()[0] : 0; }
  std::size_t d() const { return features.defined() ? features.shape()[1] : 0; }
};

enum class DataKind { TwoMoons, Blobs, Rings };

struct DataSpec {
  DataKind kind = DataKind::TwoMoons;
  std::size_t n = 1000;
  double noise = 0.1;       // two-moons / rings
  std::size_t k = 3;        // blobs
  double spread = 1.0;      // blobs
  std::uint64_t seed = 0;

  bool operator==(const DataSpec&) const = default;
};

DataKind data_kind_from_name(const std::string& name);
std::string data_kind_name(DataKind kind);

/// Balanced synthetic dataset (class counts differ by at most 1),
/// deterministic per seed.
Dataset make_dataset(const DataSpec& spec);

/// Unlabeled examples known to share one hidden label. Members index into
/// the unlabeled subset of a PartialDataset.
struct EquivalenceClass {
  int label = -1;  // hidden label (simulation ground truth)
  std::vector<std::size_t> members;
};

/// Semi-supervised split over one Dataset. Index vectors refer to rows of
/// `base`; labeled/unlabeled/validation/test are pairwise disjoint. Hidden
/// labels of unlabeled examples stay available for class construction and
/// verification only.
struct PartialDataset {
  Dataset base;
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::vector<EquivalenceClass> classes;

  int hidden_label(std::size_t unlabeled_index) const {
    return base.labels[unlabeled[unlabeled_index]];
  }
};

/// Stratified labeled subset (per-class counts differ by at most 1), then
/// validation and test drawn uniformly from the remainder; rest unlabeled.
PartialDataset split_semi(const Dataset& dataset, std::size_t n_labeled,
                          std::size_t n_validation, std::size_t n_test, std::uint64_t seed);

enum class EquivMode { PerLabel, FixedSize };

/// Attaches equivalence classes built from hidden labels. PerLabel yields one
/// class per distinct label among unlabeled rows; FixedSize partitions each
/// label group into classes of `class_size` (one smaller remainder class per
/// label allowed).
PartialDataset build_equivalence_classes(PartialDataset partial, EquivMode mode,
                                         std::size_t class_size, std::uint64_t seed);

/// Ordered index pairs (j, k), j != k, each within one equivalence class.
struct PairBatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // unlabeled-set indices
};

/// Draws m pairs uniformly over all ordered within-class pairs (class picked
/// proportionally to its ordered-pair count). Pairs are distinct within one
/// batch when the pool is large enough. Classes of size 1 are never sampled.
PairBatch sample_equiv_pairs(const PartialDataset& partial, std::size_t m, Rng& rng);

struct AugmentPolicy {
  enum class Kind { Identity, GaussianJitter, AxisFlip };
  Kind kind = Kind::Identity;
  double sigma = 0.0;   // GaussianJitter
  double flip_p = 0.0;  // AxisFlip: per-example probability of negating axis 0

  bool operator==(const AugmentPolicy&) const = default;
};

AugmentPolicy::Kind augment_kind_from_name(const std::string& name);
std::string augment_kind_name(AugmentPolicy::Kind kind);

/// Stochastic input perturbation; output shape equals input shape. The
/// identity policy returns the input values unchanged.
Tensor augment(const Tensor& batch, const AugmentPolicy& policy, Rng& rng);

/// CSV with header "f0,...,f{d-1},label"; labels 0-based contiguous ints.
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Row-gather helper: new leaf tensor with the selected rows of `matrix`.
Tensor take_rows(const Tensor& matrix, std::span<const std::size_t> indices);
std::vector<int> take_labels(const std::vector<int>& labels, std::span<const std::size_t> indices);

}  // namespace nst
