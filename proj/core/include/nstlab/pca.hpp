#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "nstlab/mlp.hpp"
#include "nstlab/tensor.hpp"

namespace nst {

struct Embedding {
  std::size_t n = 0;
  std::vector<double> coords;  // (n, 2) row-major
};

/// Projects per-example activations at the chosen layer onto their top-2
/// principal components. Layer indices 1..L-1 select post-relu hidden
/// activations, L the softmax output. Activations are mean-centered first;
/// each component's largest-magnitude loading is made positive so the result
/// is deterministic up to the data itself.
Embedding embed_features(const MlpParams& params, std::size_t layer_index, const Tensor& x);

/// CSV schema: x,y,label
void write_embedding_csv(const Embedding& embedding, std::span<const int> labels,
                         const std::filesystem::path& path);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, d x d).
/// Returns eigenvalues descending with matching eigenvectors as rows.
struct EigenResult {
  std::vector<double> values;
  std::vector<double> vectors;  // (d, d), row i is the eigenvector of values[i]
};
EigenResult symmetric_eigen(std::vector<double> matrix, std::size_t d);

}  // namespace nst
