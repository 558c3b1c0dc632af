#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nstlab/rng.hpp"
#include "nstlab/tensor.hpp"

namespace nst {

struct ModelConfig {
  std::vector<std::size_t> widths;  // input dim, hidden widths..., class count
  std::uint64_t seed = 0;
};

/// Per-layer weight matrices and bias rows, all requires-grad leaves.
/// Layer l maps widths[l] -> widths[l+1]; hidden layers use relu, the output
/// layer is linear (softmax applied by predict_proba).
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::vector<std::size_t> widths() const;
  std::size_t layer_count() const { return weights.size(); }
  std::vector<Tensor> all() const;  // weights then biases, layer order

  MlpParams clone() const;  // deep copy with fresh leaves
};

/// He-initialized weights (stddev sqrt(2/fan-in)), zero biases.
MlpParams init_params(const ModelConfig& config, Rng& rng);

Tensor predict_logits(const MlpParams& params, const Tensor& x);
/// Forward pass ending in softmax; rows sum to 1.
Tensor predict_proba(const MlpParams& params, const Tensor& x);

/// teacher' = decay * teacher + (1 - decay) * student, elementwise.
MlpParams ema_update(const MlpParams& teacher, const MlpParams& student, double decay);

/// Flat binary format: magic "NTPM", version u32, layer count u32, widths u32
/// list, then per layer little-endian float64 weights followed by biases.
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace nst
