#include "nstlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace nst {

DataKind data_kind_from_name(const std::string& name) {
  if (name == "two-moons") return DataKind::TwoMoons;
  if (name == "blobs") return DataKind::Blobs;
  if (name == "rings") return DataKind::Rings;
  throw Error(ErrorKind::Config, "unknown dataset kind \"" + name + "\"");
}

std::string data_kind_name(DataKind kind) {
  switch (kind) {
    case DataKind::TwoMoons: return "two-moons";
    case DataKind::Blobs: return "blobs";
    case DataKind::Rings: return "rings";
  }
  return "?";
}

namespace {

Dataset finish(std::vector<double> x, std::vector<int> y, std::size_t d, std::size_t k,
               std::uint64_t seed) {
  Dataset ds;
  std::size_t n = y.size();
  ds.features = Tensor::from({n, d}, std::move(x));
  ds.labels = std::move(y);
  ds.k = k;
  ds.seed = seed;
  return ds;
}

}  // namespace

Dataset make_dataset(const DataSpec& spec) {
  std::size_t k = spec.kind == DataKind::Blobs ? spec.k : 2;
  if (spec.n < k) throw Error(ErrorKind::Config, "make_dataset: n must be at least the class count");
  if (spec.noise < 0.0 || spec.spread < 0.0) {
    throw Error(ErrorKind::Config, "make_dataset: noise and spread must be nonnegative");
  }
  if (spec.kind == DataKind::Blobs && spec.k < 2) {
    throw Error(ErrorKind::Config, "make_dataset: blobs need k >= 2");
  }
  Rng rng = Rng(spec.seed).stream("make-dataset");
  std::vector<double> x;
  std::vector<int> y;
  x.reserve(spec.n * 2);
  y.reserve(spec.n);

  switch (spec.kind) {
    case DataKind::TwoMoons: {
      // Upper moon centered at origin, lower moon shifted right/down.
      std::size_t n0 = spec.n - spec.n / 2;
      std::size_t n1 = spec.n / 2;
      for (std::size_t i = 0; i < n0; ++i) {
        double t = M_PI * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n0 - 1, 1));
        x.push_back(std::cos(t) + rng.normal(0.0, spec.noise));
        x.push_back(std::sin(t) + rng.normal(0.0, spec.noise));
        y.push_back(0);
      }
      for (std::size_t i = 0; i < n1; ++i) {
        double t = M_PI * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n1 - 1, 1));
        x.push_back(1.0 - std::cos(t) + rng.normal(0.0, spec.noise));
        x.push_back(0.5 - std::sin(t) + rng.normal(0.0, spec.noise));
        y.push_back(1);
      }
      break;
    }
    case DataKind::Blobs: {
      // Every class owns two antipodal lobes on a circle of 2k centers, so
      // class membership is not recoverable from proximity alone. The radius
      // keeps adjacent centers 4 apart for any k; spread is the per-lobe
      // standard deviation.
      std::size_t centers = 2 * spec.k;
      double radius = 2.0 / std::sin(M_PI / static_cast<double>(centers));
      for (std::size_t i = 0; i < spec.n; ++i) {
        std::size_t center = i % centers;
        int c = static_cast<int>(center % spec.k);
        double angle = 2.0 * M_PI * static_cast<double>(center) / static_cast<double>(centers);
        x.push_back(radius * std::cos(angle) + rng.normal(0.0, spec.spread));
        x.push_back(radius * std::sin(angle) + rng.normal(0.0, spec.spread));
        y.push_back(c);
      }
      break;
    }
    case DataKind::Rings: {
      // Class 0 on radius 1, class 1 on radius 2.
      for (std::size_t i = 0; i < spec.n; ++i) {
        int c = static_cast<int>(i % 2);
        double r = c == 0 ? 1.0 : 2.0;
        double t = 2.0 * M_PI * rng.uniform();
        x.push_back(r * std::cos(t) + rng.normal(0.0, spec.noise));
        x.push_back(r * std::sin(t) + rng.normal(0.0, spec.noise));
        y.push_back(c);
      }
      break;
    }
  }
  return finish(std::move(x), std::move(y), 2, k, spec.seed);
}

PartialDataset split_semi(const Dataset& dataset, std::size_t n_labeled,
                          std::size_t n_validation, std::size_t n_test, std::uint64_t seed) {
  std::size_t n = dataset.n();
  if (n_labeled + n_validation + n_test > n) {
    throw Error(ErrorKind::Config, "split_semi: subset sizes exceed dataset size");
  }
  if (n_labeled < dataset.k) {
    throw Error(ErrorKind::Config, "split_semi: need at least one labeled example per class");
  }
  Rng rng = Rng(seed).stream("split-semi");

  // Stratified labeled draw: per-class quotas differing by at most 1, the
  // remainder going to a seeded random choice of classes.
  std::vector<std::vector<std::size_t>> by_class(dataset.k);
  for (std::size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
  std::vector<std::size_t> quota(dataset.k, n_labeled / dataset.k);
  std::size_t remainder = n_labeled % dataset.k;
  for (std::size_t c : rng.sample_without_replacement(dataset.k, remainder)) quota[c] += 1;

  std::vector<bool> taken(n, false);
  PartialDataset out;
  out.base = dataset;
  for (std::size_t c = 0; c < dataset.k; ++c) {
    if (quota[c] > by_class[c].size()) {
      throw Error(ErrorKind::Config, "split_semi: class " + std::to_string(c) +
                                         " has too few examples for the labeled quota");
    }
    for (std::size_t j : rng.sample_without_replacement(by_class[c].size(), quota[c])) {
      out.labeled.push_back(by_class[c][j]);
      taken[by_class[c][j]] = true;
    }
  }
  std::sort(out.labeled.begin(), out.labeled.end());

  std::vector<std::size_t> rest;
  rest.reserve(n - n_labeled);
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) rest.push_back(i);

  auto draw = [&](std::size_t count) {
    std::vector<std::size_t> picked_pos = rng.sample_without_replacement(rest.size(), count);
    std::sort(picked_pos.begin(), picked_pos.end());
    std::vector<std::size_t> picked;
    picked.reserve(count);
    for (std::size_t p : picked_pos) picked.push_back(rest[p]);
    std::vector<std::size_t> remaining;
    remaining.reserve(rest.size() - count);
    std::size_t pi = 0;
    for (std::size_t p = 0; p < rest.size(); ++p) {
      if (pi < picked_pos.size() && picked_pos[pi] == p) {
        ++pi;
      } else {
        remaining.push_back(rest[p]);
      }
    }
    rest = std::move(remaining);
    return picked;
  };
  out.validation = draw(n_validation);
  out.test = draw(n_test);
  out.unlabeled = std::move(rest);
  return out;
}

PartialDataset build_equivalence_classes(PartialDataset partial, EquivMode mode,
                                         std::size_t class_size, std::uint64_t seed) {
  partial.classes.clear();
  std::map<int, std::vector<std::size_t>> groups;  // hidden label -> unlabeled indices
  for (std::size_t i = 0; i < partial.unlabeled.size(); ++i) {
    groups[partial.hidden_label(i)].push_back(i);
  }
  if (mode == EquivMode::PerLabel) {
    for (auto& [label, members] : groups) {
      EquivalenceClass ec;
      ec.label = label;
      ec.members = std::move(members);
      partial.classes.push_back(std::move(ec));
    }
    return partial;
  }
  if (class_size < 2) {
    throw Error(ErrorKind::Config, "build_equivalence_classes: fixed-size classes need size >= 2");
  }
  Rng rng = Rng(seed).stream("equiv-classes");
  for (auto& [label, members] : groups) {
    // Shuffle within the label group, then chunk.
    std::vector<std::size_t> order = rng.permutation(members.size());
    for (std::size_t start = 0; start < members.size(); start += class_size) {
      EquivalenceClass ec;
      ec.label = label;
      std::size_t stop = std::min(start + class_size, members.size());
      for (std::size_t p = start; p < stop; ++p) ec.members.push_back(members[order[p]]);
      partial.classes.push_back(std::move(ec));
    }
  }
  return partial;
}

PairBatch sample_equiv_pairs(const PartialDataset& partial, std::size_t m, Rng& rng) {
  // Ordered-pair counts per class; classes of size < 2 contribute nothing.
  std::vector<std::size_t> pair_count;
  pair_count.reserve(partial.classes.size());
  std::size_t total = 0;
  for (const EquivalenceClass& ec : partial.classes) {
    std::size_t s = ec.members.size();
    std::size_t c = s >= 2 ? s * (s - 1) : 0;
    pair_count.push_back(c);
    total += c;
  }
  if (total == 0) {
    throw Error(ErrorKind::EmptyPairPool, "sample_equiv_pairs: no equivalence class of size >= 2");
  }

  auto draw_one = [&]() {
    std::size_t u = rng.uniform_index(total);
    std::size_t ci = 0;
    while (u >= pair_count[ci]) {
      u -= pair_count[ci];
      ++ci;
    }
    const auto& members = partial.classes[ci].members;
    std::size_t s = members.size();
    std::size_t i = u / (s - 1);
    std::size_t r = u % (s - 1);
    std::size_t j = r < i ? r : r + 1;
    return std::make_pair(members[i], members[j]);
  };

  PairBatch batch;
  batch.pairs.reserve(m);
  if (m >= total) {
    // Pool smaller than the request: duplicates unavoidable.
    for (std::size_t t = 0; t < m; ++t) batch.pairs.push_back(draw_one());
    return batch;
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * m + 100;
  while (batch.pairs.size() < m) {
    auto p = draw_one();
    if (seen.insert(p).second || ++attempts > max_attempts) {
      batch.pairs.push_back(p);
    }
  }
  return batch;
}

AugmentPolicy::Kind augment_kind_from_name(const std::string& name) {
  if (name == "identity") return AugmentPolicy::Kind::Identity;
  if (name == "gaussian-jitter") return AugmentPolicy::Kind::GaussianJitter;
  if (name == "axis-flip") return AugmentPolicy::Kind::AxisFlip;
  throw Error(ErrorKind::Config, "unknown augmentation \"" + name + "\"");
}

std::string augment_kind_name(AugmentPolicy::Kind kind) {
  switch (kind) {
    case AugmentPolicy::Kind::Identity: return "identity";
    case AugmentPolicy::Kind::GaussianJitter: return "gaussian-jitter";
    case AugmentPolicy::Kind::AxisFlip: return "axis-flip";
  }
  return "?";
}

Tensor augment(const Tensor& batch, const AugmentPolicy& policy, Rng& rng) {
  if (policy.sigma < 0.0 || policy.flip_p < 0.0 || policy.flip_p > 1.0) {
    throw Error(ErrorKind::Config, "augment: invalid policy parameters");
  }
  std::vector<double> out(batch.values().begin(), batch.values().end());
  std::size_t rows = batch.rows(), cols = batch.cols();
  switch (policy.kind) {
    case AugmentPolicy::Kind::Identity:
      break;
    case AugmentPolicy::Kind::GaussianJitter:
      if (policy.sigma > 0.0) {
        for (double& v : out) v += rng.normal(0.0, policy.sigma);
      }
      break;
    case AugmentPolicy::Kind::AxisFlip:
      for (std::size_t r = 0; r < rows; ++r) {
        if (rng.uniform() < policy.flip_p) out[r * cols] = -out[r * cols];
      }
      break;
  }
  return Tensor::from(batch.shape(), std::move(out));
}

namespace {

double parse_cell(const std::string& cell, std::size_t line_no) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse,
                "csv: non-numeric cell \"" + cell + "\" at line " + std::to_string(line_no));
  }
  if (pos != cell.size()) {
    throw Error(ErrorKind::Parse,
                "csv: non-numeric cell \"" + cell + "\" at line " + std::to_string(line_no));
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "load_dataset_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Parse, "load_dataset_csv: empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw Error(ErrorKind::Parse, "load_dataset_csv: header must be f0,...,label");
  }
  std::size_t d = header.size() - 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (header[i] != "f" + std::to_string(i)) {
      throw Error(ErrorKind::Parse, "load_dataset_csv: unexpected header column \"" + header[i] + "\"");
    }
  }
  std::vector<double> x;
  std::vector<int> y;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != d + 1) {
      throw Error(ErrorKind::Parse, "csv: expected " + std::to_string(d + 1) + " cells, got " +
                                        std::to_string(cells.size()) + " at line " +
                                        std::to_string(line_no));
    }
    for (std::size_t i = 0; i < d; ++i) x.push_back(parse_cell(cells[i], line_no));
    double lv = parse_cell(cells.back(), line_no);
    int label = static_cast<int>(lv);
    if (static_cast<double>(label) != lv || label < 0) {
      throw Error(ErrorKind::LabelDomain,
                  "csv: label must be a nonnegative integer at line " + std::to_string(line_no));
    }
    y.push_back(label);
  }
  if (y.empty()) throw Error(ErrorKind::Parse, "load_dataset_csv: no data rows");

  int max_label = *std::max_element(y.begin(), y.end());
  std::vector<bool> present(max_label + 1, false);
  for (int label : y) present[label] = true;
  for (int c = 0; c <= max_label; ++c) {
    if (!present[c]) {
      throw Error(ErrorKind::LabelDomain,
                  "csv: labels not contiguous, class " + std::to_string(c) + " missing");
    }
  }
  Dataset ds;
  ds.features = Tensor::from({y.size(), d}, std::move(x));
  ds.labels = std::move(y);
  ds.k = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "save_dataset_csv: cannot open " + path.string());
  std::size_t d = dataset.d();
  for (std::size_t i = 0; i < d; ++i) os << "f" << i << ",";
  os << "label\n";
  auto v = dataset.features.values();
  char buf[64];
  for (std::size_t r = 0; r < dataset.n(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", v[r * d + c]);
      os << buf << ",";
    }
    os << dataset.labels[r] << "\n";
  }
  if (!os) throw Error(ErrorKind::Io, "save_dataset_csv: write failed for " + path.string());
}

Tensor take_rows(const Tensor& matrix, std::span<const std::size_t> indices) {
  std::size_t cols = matrix.cols();
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  auto v = matrix.values();
  for (std::size_t idx : indices) {
    for (std::size_t c = 0; c < cols; ++c) out.push_back(v[idx * cols + c]);
  }
  return Tensor::from({indices.size(), cols}, std::move(out));
}

std::vector<int> take_labels(const std::vector<int>& labels, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(labels[idx]);
  return out;
}

}  // namespace nst
