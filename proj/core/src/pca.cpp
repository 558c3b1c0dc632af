#include "nstlab/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace nst {

EigenResult symmetric_eigen(std::vector<double> a, std::size_t d) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  auto off_diag = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) s += a[i * d + j] * a[i * d + j];
    return s;
  };

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps && off_diag() > 1e-30; ++sweep) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        double app = a[p * d + p], aqq = a[q * d + q];
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t i = 0; i < d; ++i) {
          double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          double vip = v[i * d + p], viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x * d + x] > a[y * d + y]; });

  EigenResult out;
  out.values.resize(d);
  out.vectors.resize(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    out.values[r] = a[order[r] * d + order[r]];
    for (std::size_t i = 0; i < d; ++i) out.vectors[r * d + i] = v[i * d + order[r]];
  }
  return out;
}

namespace {

/// Forward pass returning the requested layer's activations as plain data.
Tensor layer_activations(const MlpParams& params, std::size_t layer_index, const Tensor& x) {
  std::size_t layers = params.layer_count();
  if (layer_index < 1 || layer_index > layers) {
    throw Error(ErrorKind::Config, "embed_features: layer index must be in 1.." +
                                       std::to_string(layers));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add(matmul(h, params.weights[l]), params.biases[l]);
    if (l + 1 < layers) {
      h = relu(h);
    } else {
      h = softmax(h);
    }
    if (l + 1 == layer_index) return h.detach();
  }
  return h.detach();
}

}  // namespace

Embedding embed_features(const MlpParams& params, std::size_t layer_index, const Tensor& x) {
  if (x.rows() < 2) {
    throw Error(ErrorKind::Contract, "embed_features: need at least 2 examples");
  }
  Tensor act = layer_activations(params, layer_index, x);
  std::size_t n = act.rows(), d = act.cols();
  std::vector<double> centered(act.values().begin(), act.values().end());
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += centered[r * d + c];
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) centered[r * d + c] -= mean;
  }

  std::vector<double> cov(d * d, 0.0);
  double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += centered[r * d + i] * centered[r * d + j];
      cov[i * d + j] = cov[j * d + i] = s * inv;
    }

  double total_variance = 0.0;
  for (std::size_t i = 0; i < d; ++i) total_variance += cov[i * d + i];
  if (total_variance <= 0.0) {
    throw Error(ErrorKind::DegenerateEmbedding, "embed_features: activations have zero variance");
  }

  EigenResult eig = symmetric_eigen(cov, d);

  // Sign convention: largest-magnitude loading positive.
  for (std::size_t comp = 0; comp < 2 && comp < d; ++comp) {
    double* vec = eig.vectors.data() + comp * d;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(vec[i]) > std::abs(vec[arg])) arg = i;
    if (vec[arg] < 0.0)
      for (std::size_t i = 0; i < d; ++i) vec[i] = -vec[i];
  }

  Embedding out;
  out.n = n;
  out.coords.assign(n * 2, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t comp = 0; comp < 2; ++comp) {
      double s = 0.0;
      if (comp < d) {
        for (std::size_t i = 0; i < d; ++i) s += centered[r * d + i] * eig.vectors[comp * d + i];
      }
      out.coords[r * 2 + comp] = s;
    }
  }
  return out;
}

void write_embedding_csv(const Embedding& embedding, std::span<const int> labels,
                         const std::filesystem::path& path) {
  if (labels.size() != embedding.n) {
    throw Error(ErrorKind::Dimension, "write_embedding_csv: one label per embedded row required");
  }
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_embedding_csv: cannot open " + path.string());
  os << "x,y,label\n";
  char buf[64];
  for (std::size_t r = 0; r < embedding.n; ++r) {
    std::snprintf(buf, sizeof buf, "%.12g", embedding.coords[r * 2]);
    os << buf << ",";
    std::snprintf(buf, sizeof buf, "%.12g", embedding.coords[r * 2 + 1]);
    os << buf << "," << labels[r] << "\n";
  }
}

}  // namespace nst
