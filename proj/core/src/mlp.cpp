#include "nstlab/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace nst {

std::vector<std::size_t> MlpParams::widths() const {
  std::vector<std::size_t> w;
  if (weights.empty()) return w;
  w.push_back(weights[0].shape()[0]);
  for (const Tensor& m : weights) w.push_back(m.shape()[1]);
  return w;
}

std::vector<Tensor> MlpParams::all() const {
  std::vector<Tensor> out;
  out.reserve(weights.size() * 2);
  for (const Tensor& w : weights) out.push_back(w);
  for (const Tensor& b : biases) out.push_back(b);
  return out;
}

MlpParams MlpParams::clone() const {
  MlpParams out;
  for (const Tensor& w : weights)
    out.weights.push_back(Tensor::param(w.shape(), {w.values().begin(), w.values().end()}));
  for (const Tensor& b : biases)
    out.biases.push_back(Tensor::param(b.shape(), {b.values().begin(), b.values().end()}));
  return out;
}

MlpParams init_params(const ModelConfig& config, Rng& rng) {
  if (config.widths.size() < 2) {
    throw Error(ErrorKind::Config, "init_params: need at least input and output widths");
  }
  for (std::size_t w : config.widths) {
    if (w == 0) throw Error(ErrorKind::Config, "init_params: zero layer width");
  }
  MlpParams params;
  for (std::size_t l = 0; l + 1 < config.widths.size(); ++l) {
    std::size_t fan_in = config.widths[l];
    std::size_t fan_out = config.widths[l + 1];
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.normal(0.0, stddev);
    params.weights.push_back(Tensor::param({fan_in, fan_out}, std::move(w)));
    params.biases.push_back(Tensor::param({fan_out}, std::vector<double>(fan_out, 0.0)));
  }
  return params;
}

Tensor predict_logits(const MlpParams& params, const Tensor& x) {
  if (x.shape().size() != 2 || params.weights.empty() || x.shape()[1] != params.weights[0].shape()[0]) {
    throw Error(ErrorKind::Dimension, "predict: input columns must equal model input width");
  }
  Tensor h = x;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    h = add(matmul(h, params.weights[l]), params.biases[l]);
    if (l + 1 < params.weights.size()) h = relu(h);
  }
  return h;
}

Tensor predict_proba(const MlpParams& params, const Tensor& x) {
  return softmax(predict_logits(params, x));
}

MlpParams ema_update(const MlpParams& teacher, const MlpParams& student, double decay) {
  if (decay < 0.0 || decay > 1.0) {
    throw Error(ErrorKind::Config, "ema_update: decay must be in [0, 1]");
  }
  if (teacher.weights.size() != student.weights.size()) {
    throw Error(ErrorKind::Dimension, "ema_update: layer count mismatch");
  }
  auto blend = [decay](const Tensor& t, const Tensor& s) {
    if (t.shape() != s.shape()) throw Error(ErrorKind::Dimension, "ema_update: shape mismatch");
    std::vector<double> out(t.size());
    auto vt = t.values(), vs = s.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decay * vt[i] + (1.0 - decay) * vs[i];
    return Tensor::param(t.shape(), std::move(out));
  };
  MlpParams out;
  for (std::size_t l = 0; l < teacher.weights.size(); ++l) {
    out.weights.push_back(blend(teacher.weights[l], student.weights[l]));
    out.biases.push_back(blend(teacher.biases[l], student.biases[l]));
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'N', 'T', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "save_params: cannot open " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  auto widths = params.widths();
  put_u32(os, static_cast<std::uint32_t>(params.layer_count()));
  for (std::size_t w : widths) put_u32(os, static_cast<std::uint32_t>(w));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    for (double v : params.weights[l].values()) put_f64(os, v);
    for (double v : params.biases[l].values()) put_f64(os, v);
  }
  if (!os) throw Error(ErrorKind::Io, "save_params: write failed for " + path.string());
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "load_params: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::Parse, "load_params: bad magic in " + path.string());
  }
  std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw Error(ErrorKind::Parse, "load_params: unsupported version " + std::to_string(version));
  }
  std::uint32_t layers = get_u32(is);
  if (layers == 0) throw Error(ErrorKind::Parse, "load_params: zero layers");
  std::vector<std::size_t> widths(layers + 1);
  for (auto& w : widths) {
    w = get_u32(is);
    if (w == 0) throw Error(ErrorKind::Parse, "load_params: zero width");
  }
  MlpParams params;
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    std::vector<double> w(fan_in * fan_out), b(fan_out);
    for (double& v : w) v = get_f64(is);
    for (double& v : b) v = get_f64(is);
    if (!is) throw Error(ErrorKind::Parse, "load_params: truncated file " + path.string());
    params.weights.push_back(Tensor::param({fan_in, fan_out}, std::move(w)));
    params.biases.push_back(Tensor::param({fan_out}, std::move(b)));
  }
  return params;
}

}  // namespace nst
