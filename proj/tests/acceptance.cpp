// Acceptance suite: every criterion below is checked at its stated tolerance
// and prints exactly one pass/fail line. The process exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nstlab/config.hpp"
#include "nstlab/harness.hpp"
#include "nstlab/losses.hpp"
#include "nstlab/pca.hpp"
#include "nstlab/trainer.hpp"

using namespace nst;
namespace fs = std::filesystem;

namespace {

struct Runner {
  int failures = 0;

  void run(const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    auto t0 = std::chrono::steady_clock::now();
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), seconds,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
}

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double s = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - rng.uniform());
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::size_t sweep_jobs() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 2 : std::min<unsigned>(hw, 8);
}

// ---------------------------------------------------------------------------
// criterion bodies

bool criterion_gradients(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  Rng outer(20240107);
  double worst = 0.0;

  // Central differences assume the loss is smooth within +/-h of the point;
  // a relu pre-activation inside that margin would put a kink between the
  // two evaluations. Configurations violating the margin are redrawn.
  auto min_preactivation = [](const MlpParams& params, const Tensor& x) {
    double min_abs = 1e300;
    Tensor h = x;
    for (std::size_t l = 0; l + 1 < params.layer_count(); ++l) {
      h = add(matmul(h, params.weights[l]), params.biases[l]);
      for (double v : h.values()) min_abs = std::min(min_abs, std::abs(v));
      h = relu(h);
    }
    return min_abs;
  };

  for (int config_index = 0; config_index < 20; ++config_index) {
    std::size_t depth, batch;
    std::vector<std::size_t> widths;
    MlpParams params;
    Tensor x;
    std::vector<int> targets;
    for (int attempt = 0;; ++attempt) {
      depth = 2 + outer.uniform_index(2);  // 2 or 3 layers
      widths.clear();
      widths.push_back(2 + outer.uniform_index(5));
      for (std::size_t l = 0; l + 1 < depth; ++l) widths.push_back(2 + outer.uniform_index(15));
      widths.push_back(2 + outer.uniform_index(5));

      Rng init = outer.stream("init-" + std::to_string(config_index) + "-" + std::to_string(attempt));
      params = init_params({widths, 0}, init);

      batch = 3 + outer.uniform_index(4);
      std::vector<double> xv(batch * widths.front());
      for (double& v : xv) v = outer.uniform(-1.5, 1.5);
      x = Tensor::from({batch, widths.front()}, xv);
      targets.clear();
      for (std::size_t i = 0; i < batch; ++i)
        targets.push_back(static_cast<int>(outer.uniform_index(widths.back())));

      if (min_preactivation(params, x) > 1e-2) break;
      if (attempt > 100) {
        detail = "could not find a kink-free configuration";
        return false;
      }
    }

    std::vector<Tensor> leaves = params.all();
    GradientMap ad = backward(cross_entropy(predict_proba(params, x), targets), leaves);

    std::size_t layer_count = params.layer_count();
    auto f = [&](std::span<const Tensor> p) {
      MlpParams probe;
      for (std::size_t l = 0; l < layer_count; ++l) probe.weights.push_back(p[l]);
      for (std::size_t l = 0; l < layer_count; ++l) probe.biases.push_back(p[layer_count + l]);
      return cross_entropy(predict_proba(probe, x), targets).item();
    };
    GradientMap fd = finite_diff_grad(f, leaves, 1e-5);

    for (const Tensor& leaf : leaves) {
      auto ga = ad.at(leaf.id()).values();
      auto gf = fd.at(leaf.id()).values();
      for (std::size_t i = 0; i < ga.size(); ++i) worst = std::max(worst, rel_err(ga[i], gf[i]));
    }
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[128];
  std::snprintf(buf, sizeof buf, "max rel err %.3g, %.1fs", worst, seconds);
  detail = buf;
  return worst < 1e-4 && seconds < 30.0;
}

bool criterion_loss_identities(std::string& detail) {
  const double tol = 1e-12;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };

  // cross-entropy
  std::vector<int> c0 = {0}, c1 = {1}, c7 = {7};
  expect(cross_entropy(Tensor::from({1, 2}, {1.0, 0.0}), c0).item() == 0.0, "ce perfect");
  expect(std::abs(cross_entropy(Tensor::from({1, 10}, std::vector<double>(10, 0.1)), c7).item() -
                  std::log(10.0)) < tol,
         "ce uniform");
  expect(std::abs(cross_entropy(Tensor::from({1, 2}, {0.8, 0.2}), c1).item() + std::log(0.2)) < tol,
         "ce hand");

  // pair consistency
  Tensor p64 = Tensor::from({2}, {0.6, 0.4});
  expect(pair_consistency_loss(p64, p64).item() == 0.0, "pair zero");
  expect(pair_consistency_loss(Tensor::from({2}, {1.0, 0.0}), Tensor::from({2}, {0.0, 1.0})).item() ==
             2.0,
         "pair max");
  expect(std::abs(pair_consistency_loss(p64, Tensor::from({2}, {0.5, 0.5})).item() - 0.02) < tol,
         "pair hand");

  // nst composition
  Rng mrng(3);
  MlpParams model = init_params({{2, 8, 2}, 3}, mrng);
  Tensor xl = Tensor::from({2, 2}, {0.1, -0.2, 0.6, 0.9});
  std::vector<int> yl = {0, 1};
  Tensor xj = Tensor::from({2, 2}, {0.3, 0.3, -0.2, 0.9});
  Tensor xk = Tensor::from({2, 2}, {0.5, 0.1, -0.4, 0.7});
  double ce = cross_entropy(predict_proba(model, xl), yl).item();
  expect(nst_loss(model, xl, yl, xj, xk, 0.0).item() == ce, "nst lambda 0");
  expect(nst_loss(model, xl, yl, xj, xj, 3.0).item() == ce, "nst identical pairs");
  {
    Tensor l = predict_proba(model, xj), r = predict_proba(model, xk);
    double pair = pair_consistency_loss(l, r).item() / 2.0;
    expect(std::abs(nst_loss(model, xl, yl, xj, xk, 1.5).item() - (ce + 1.5 * pair)) < tol,
           "nst recompute");
  }

  // sharpen
  {
    auto u = sharpen(Tensor::from({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}), 0.25).to_vector();
    for (double v : u) expect(std::abs(v - 1.0 / 3) < tol, "sharpen uniform");
    auto ident = sharpen(Tensor::from({2}, {0.8, 0.2}), 1.0).to_vector();
    expect(std::abs(ident[0] - 0.8) < tol && std::abs(ident[1] - 0.2) < tol, "sharpen T=1");
    auto sharp = sharpen(Tensor::from({2}, {0.8, 0.2}), 0.5).to_vector();
    expect(std::abs(sharp[0] - 16.0 / 17.0) < tol && std::abs(sharp[1] - 1.0 / 17.0) < tol,
           "sharpen hand");
  }

  // guess label
  {
    std::vector<double> x = {0.4, -0.9};
    Rng grng(6);
    GuessedLabel g = guess_label(model, x, 1, {AugmentPolicy::Kind::Identity, 0, 0}, 1.0, grng);
    auto direct = predict_proba(model, Tensor::from({1, 2}, x)).to_vector();
    expect(std::abs(g.q[0] - direct[0]) < tol && std::abs(g.q[1] - direct[1]) < tol,
           "guess degenerate");
    double sum = g.q[0] + g.q[1];
    expect(std::abs(sum - 1.0) < tol, "guess simplex");
  }

  // mixup endpoint and simplex preservation
  {
    std::vector<double> x1 = {1.0, 2.0}, x2 = {3.0, 4.0};
    std::vector<double> p1 = {0.9, 0.1}, p2 = {0.2, 0.8};
    MixedExample end = mixup_with_lambda(x1, p1, x2, p2, 1.0);
    expect(end.x == x1 && end.p == p1, "mixup endpoint");
    MixedExample mid = mixup_with_lambda(x1, p1, x2, p2, 0.3);
    expect(std::abs(mid.p[0] + mid.p[1] - 1.0) < tol, "mixup simplex");
    expect(std::abs(mid.x[0] - (0.7 * 1.0 + 0.3 * 3.0)) < tol, "mixup hand");
  }

  // mixmatch batch structure
  {
    MixConfig mc{0.75, 0.5, 2};
    AugmentPolicy identity{AugmentPolicy::Kind::Identity, 0, 0};
    Rng a1(5), m1(6), a2(5), m2(6);
    MixmatchBatchResult r1 = mixmatch_batch(model, xl, yl, xj, xk, identity, mc, a1, m1);
    MixmatchBatchResult r2 = mixmatch_batch(model, xl, yl, xj, xk, identity, mc, a2, m2);
    expect(r1.mixed.x_labeled.rows() == 2 && r1.mixed.x_unlabeled.rows() == 8, "mixmatch sizes");
    auto v1 = r1.mixed.x_unlabeled.values(), v2 = r2.mixed.x_unlabeled.values();
    bool same = true;
    for (std::size_t i = 0; i < v1.size(); ++i) same = same && v1[i] == v2[i];
    expect(same, "mixmatch determinism");

    Rng fresh(99);
    std::vector<double> ex = {xj.values()[0], xj.values()[1]};
    GuessedLabel direct = guess_label(model, ex, 2, identity, 0.5, fresh);
    expect(r1.q_pair_left.values()[0] == direct.q[0] && r1.q_pair_left.values()[1] == direct.q[1],
           "mixmatch pre-mix guesses");

    auto [lx, lu] = mixmatch_losses(model, r1.mixed);
    MixedBatch self = r1.mixed;
    self.q_unlabeled = predict_proba(model, r1.mixed.x_unlabeled).detach();
    expect(mixmatch_losses(model, self).second.item() == 0.0, "mixmatch lu zero residual");
  }

  // combined loss
  expect(combined_loss(1.25, 9.0, 4.0, 0.0, 0.0) == 1.25, "combined zero weights");
  expect(std::abs(combined_loss(1.0, 0.5, 0.2, 75.0, 1.0) - 38.7) < tol, "combined hand");
  {
    TrainConfig defaults;
    expect(defaults.weights.lambda_e == 1.0, "default lambda_e is 1");
    Rng crng(77);
    for (int t = 0; t < 100; ++t) {
      double lx = crng.uniform(0.0, 3.0), lu = crng.uniform(0.0, 3.0), le = crng.uniform(0.0, 3.0);
      double wu = crng.uniform(0.0, 100.0), we = crng.uniform(0.0, 5.0);
      double got = combined_loss(Tensor::scalar(lx), Tensor::scalar(lu), Tensor::scalar(le), wu, we)
                       .item();
      if (std::abs(got - (lx + wu * lu + we * le)) >= tol) {
        bad.push_back("combined recompute");
        break;
      }
    }
  }

  // pi-model
  {
    Rng prng(9);
    Tensor xu = Tensor::from({2, 2}, {0.1, 0.2, -0.3, 0.4});
    expect(pi_model_loss(model, xu, {AugmentPolicy::Kind::Identity, 0, 0}, prng).item() == 0.0,
           "pi identity");
    AugmentPolicy jitter{AugmentPolicy::Kind::GaussianJitter, 0.2, 0};
    expect(pi_model_loss(model, xu, jitter, prng).item() >= 0.0, "pi nonneg");
  }

  // pseudo-label
  std::vector<double> low = {0.6, 0.4}, high = {0.96, 0.04}, sub = {0.999, 0.001};
  expect(pseudo_label_loss(low, 0.95) == 0.0, "pl gate closed");
  expect(std::abs(pseudo_label_loss(high, 0.95) + std::log(0.96)) < tol, "pl hand");
  expect(pseudo_label_loss(sub, 1.0) == 0.0, "pl threshold one");

  // mean teacher
  Tensor s_row = Tensor::from({2}, {0.7, 0.3});
  expect(mean_teacher_loss(s_row, s_row).item() == 0.0, "mt zero");
  expect(std::abs(mean_teacher_loss(s_row, Tensor::from({2}, {0.6, 0.4})).item() - 0.02) < tol,
         "mt hand");

  // vat
  {
    Rng vrng(12);
    Tensor xv = Tensor::from({2, 2}, {0.5, -0.5, 0.2, 0.8});
    expect(vat_loss(model, xv, 1e-6, 0.0, 1, vrng).item() == 0.0, "vat eps zero");
    std::vector<double> dir;
    Rng vrng2(12);
    double v = vat_loss(model, xv, 1e-6, 0.5, 1, vrng2, &dir).item();
    expect(v >= 0.0, "vat nonneg");
    bool unit = true;
    for (std::size_t r = 0; r < 2; ++r) {
      unit = unit && std::abs(std::hypot(dir[r * 2], dir[r * 2 + 1]) - 1.0) < tol;
    }
    expect(unit, "vat unit direction");
  }

  if (!bad.empty()) {
    detail = "failed: ";
    for (const std::string& b : bad) detail += b + "; ";
    return false;
  }
  detail = "all loss identities hold at 1e-12";
  return true;
}

bool criterion_sharpening(std::string& detail) {
  Rng rng(31415);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t k = 2 + rng.uniform_index(9);
    std::vector<double> p = random_simplex(rng, k);
    for (double t : {0.25, 0.5, 1.0}) {
      auto q = sharpen(Tensor::from({k}, p), t).to_vector();
      double sum = 0.0;
      std::size_t ap = 0, aq = 0;
      for (std::size_t i = 0; i < k; ++i) {
        sum += q[i];
        if (p[i] > p[ap]) ap = i;
        if (q[i] > q[aq]) aq = i;
      }
      if (std::abs(sum - 1.0) >= 1e-12) {
        detail = "row left the simplex";
        return false;
      }
      if (ap != aq) {
        detail = "argmax changed";
        return false;
      }
      if (entropy(q) > entropy(p) + 1e-12) {
        detail = "entropy increased";
        return false;
      }
      if (t == 1.0) {
        for (std::size_t i = 0; i < k; ++i) {
          if (std::abs(q[i] - p[i]) >= 1e-12) {
            detail = "T=1 is not the identity";
            return false;
          }
        }
      }
    }
  }
  detail = "1000 simplex points, T in {0.25, 0.5, 1}";
  return true;
}

bool criterion_mixup(std::string& detail) {
  Rng rng(27182);
  std::vector<double> x1 = {0.2, -1.0, 3.0}, x2 = {1.4, 2.0, -0.5};
  std::vector<double> p1 = {0.7, 0.2, 0.1}, p2 = {0.1, 0.1, 0.8};
  for (double alpha : {0.25, 0.75, 2.0}) {
    for (int t = 0; t < 1000; ++t) {
      MixedExample me = mixup(x1, p1, x2, p2, alpha, rng);
      if (me.lambda_prime < 0.5 || me.lambda_prime > 1.0) {
        detail = "lambda' outside [0.5, 1]";
        return false;
      }
      for (std::size_t i = 0; i < 3; ++i) {
        double lo = std::min(x1[i], x2[i]), hi = std::max(x1[i], x2[i]);
        if (me.x[i] < lo - 1e-12 || me.x[i] > hi + 1e-12) {
          detail = "mixed example left the convex hull";
          return false;
        }
      }
      double sum = me.p[0] + me.p[1] + me.p[2];
      if (std::abs(sum - 1.0) >= 1e-12) {
        detail = "label row left the simplex";
        return false;
      }
    }
  }
  detail = "3000 draws across alpha in {0.25, 0.75, 2}";
  return true;
}

bool criterion_schedules(std::string& detail) {
  TrainConfig config;
  config.rampup_steps = 100;
  config.weights.lambda_u = 75.0;
  config.weights.lambda_e = 1.5;

  if (effective_weights(config, 0).lambda_u != 0.0) {
    detail = "lambda_u not zero at step 0";
    return false;
  }
  if (effective_weights(config, 100).lambda_u != 75.0 ||
      effective_weights(config, 1000).lambda_u != 75.0) {
    detail = "lambda_u not saturated at rampup length";
    return false;
  }
  if (effective_weights(config, 50).lambda_u != 37.5) {
    detail = "lambda_u not linear at the midpoint";
    return false;
  }
  for (std::size_t step : {std::size_t{0}, std::size_t{50}, std::size_t{100}, std::size_t{200}}) {
    if (effective_weights(config, step).lambda_e != 1.5) {
      detail = "lambda_e varied with the step";
      return false;
    }
  }
  TrainConfig constant = config;
  constant.rampup_steps = 0;
  if (effective_weights(constant, 0).lambda_u != 75.0) {
    detail = "rampup length 0 must mean constant";
    return false;
  }
  detail = "lambda_u ramps linearly, lambda_e stays constant";
  return true;
}

bool criterion_equivalence(std::string& detail) {
  DataSpec spec;
  spec.kind = DataKind::Blobs;
  spec.n = 2000;
  spec.k = 10;
  spec.spread = 1.0;
  spec.seed = 11;
  Dataset ds = make_dataset(spec);
  PartialDataset part = split_semi(ds, 40, 0, 200, 5);
  part = build_equivalence_classes(std::move(part), EquivMode::PerLabel, 0, 5);
  if (part.classes.size() != 10) {
    detail = "per-label class count != k";
    return false;
  }
  Rng rng(161803);
  std::size_t checked = 0;
  for (int batch = 0; batch < 100; ++batch) {
    PairBatch pairs = sample_equiv_pairs(part, 1000, rng);
    for (auto [j, k] : pairs.pairs) {
      if (part.hidden_label(j) != part.hidden_label(k)) {
        detail = "sampled pair crossed labels";
        return false;
      }
      ++checked;
    }
  }
  if (checked != 100000) {
    detail = "expected 1e5 sampled pairs";
    return false;
  }

  PartialDataset sized = build_equivalence_classes(part, EquivMode::FixedSize, 2, 5);
  for (const EquivalenceClass& ec : sized.classes) {
    if (ec.members.size() > 2) {
      detail = "fixed-size class exceeded s=2";
      return false;
    }
  }
  detail = "10 per-label classes; 100000/100000 pairs share labels; s=2 respected";
  return true;
}

bool criterion_experiment_one(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec spec;
  spec.dataset.kind = DataKind::TwoMoons;
  spec.dataset.n = 2500;  // 2000 train pool + 500 test
  spec.dataset.noise = 0.05;
  spec.dataset.seed = 2020;
  spec.split.n_validation = 0;
  spec.split.n_test = 500;
  spec.split.mode = EquivMode::PerLabel;
  spec.methods = {Method::Supervised, Method::Nst};
  spec.n_labeled = {4, 8, 16, 32};
  spec.seeds = {1, 2, 3, 4, 5};
  spec.train.hidden_widths = {32, 32};
  spec.train.learning_rate = 3e-3;
  spec.train.steps = 1500;
  spec.train.batch_labeled = 32;
  spec.train.batch_unlabeled = 32;
  spec.train.weights.lambda = 1.0;
  spec.train.rampup_steps = 400;
  spec.train.weight_decay = 1e-4;
  spec.train.eval_interval = 1500;

  SweepResult result = run_sweep(spec, sweep_jobs());
  if (!result.errors.empty()) {
    detail = "sweep reported failures: " + result.errors.front().message;
    return false;
  }

  auto mean_of = [&](const char* method, std::size_t budget) {
    for (const AggregateRow& r : result.aggregate) {
      if (r.method == method && r.n_labeled == budget) return r.mean_error;
    }
    return 2.0;
  };

  std::ostringstream os;
  bool ok = true;
  for (std::size_t budget : spec.n_labeled) {
    double sup = mean_of("supervised", budget);
    double nst = mean_of("nst", budget);
    os << "n=" << budget << " sup " << sup << " vs nst " << nst << "; ";
    if (!(nst < sup)) ok = false;
  }
  double gap_small = mean_of("supervised", 4) - mean_of("nst", 4);
  os << "gap@4 " << gap_small * 100.0 << "pp";
  if (!(gap_small >= 0.05)) ok = false;

  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (seconds >= 300.0) ok = false;
  detail = os.str();
  return ok;
}

bool criterion_experiment_two(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  // Each blobs class has two far-apart lobes, so proximity-based guessing
  // cannot link them; the equivalence pairs can. lambda_e follows the
  // tuned-weight practice of the hyperparameter search.
  ExperimentSpec spec;
  spec.dataset.kind = DataKind::Blobs;
  spec.dataset.n = 2000;
  spec.dataset.k = 10;
  spec.dataset.spread = 0.6;
  spec.dataset.seed = 2021;
  spec.split.n_validation = 0;
  spec.split.n_test = 400;
  spec.split.mode = EquivMode::PerLabel;
  spec.methods = {Method::MixMatch, Method::MixMatchNst};
  spec.n_labeled = {20};
  spec.seeds = {1, 2, 3, 4, 5};
  spec.train.hidden_widths = {32, 32};
  spec.train.learning_rate = 3e-3;
  spec.train.steps = 1200;
  spec.train.batch_labeled = 32;
  spec.train.batch_unlabeled = 64;
  spec.train.weights.lambda_u = 25.0;
  spec.train.weights.lambda_e = 2.0;
  spec.train.mix = {0.75, 0.5, 2};
  spec.train.rampup_steps = 200;
  spec.train.weight_decay = 1e-4;
  spec.train.eval_interval = 1200;
  spec.train.augment = {AugmentPolicy::Kind::GaussianJitter, 0.3, 0};

  SweepResult result = run_sweep(spec, sweep_jobs());
  if (!result.errors.empty()) {
    detail = "sweep reported failures: " + result.errors.front().message;
    return false;
  }
  double mm = 2.0, mmnst = 2.0;
  for (const AggregateRow& r : result.aggregate) {
    if (r.method == "mixmatch") mm = r.mean_error;
    if (r.method == "mixmatch-nst") mmnst = r.mean_error;
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "mixmatch " << mm << " vs mixmatch-nst " << mmnst << ", " << seconds << "s";
  detail = os.str();
  return mmnst <= mm && seconds < 600.0;
}

bool criterion_zero_weight(std::string& detail) {
  DataSpec dspec;
  dspec.kind = DataKind::Blobs;
  dspec.n = 240;
  dspec.k = 3;
  dspec.spread = 0.6;
  dspec.seed = 99;
  Dataset ds = make_dataset(dspec);
  PartialDataset part = split_semi(ds, 9, 0, 60, 4);
  part = build_equivalence_classes(std::move(part), EquivMode::PerLabel, 0, 4);

  auto identical = [](const MlpParams& a, const MlpParams& b) {
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
      auto wa = a.weights[l].values(), wb = b.weights[l].values();
      for (std::size_t i = 0; i < wa.size(); ++i)
        if (wa[i] != wb[i]) return false;
      auto ba = a.biases[l].values(), bb = b.biases[l].values();
      for (std::size_t i = 0; i < ba.size(); ++i)
        if (ba[i] != bb[i]) return false;
    }
    return true;
  };

  TrainConfig base;
  base.hidden_widths = {16};
  base.steps = 40;
  base.batch_labeled = 8;
  base.batch_unlabeled = 8;
  base.seed = 12;
  base.augment = {AugmentPolicy::Kind::GaussianJitter, 0.1, 0};
  base.weights.lambda = 0.0;
  base.weights.lambda_u = 1.0;
  base.weights.lambda_e = 0.0;
  base.rampup_steps = 10;

  {
    TrainConfig nst = base;
    nst.method = Method::Nst;
    TrainConfig sup = base;
    sup.method = Method::Supervised;
    TrainerSession a(nst, part), b(sup, part);
    for (int i = 0; i < 40; ++i) {
      a.step();
      b.step();
      if (!identical(a.params(), b.params())) {
        detail = "nst(lambda=0) diverged from supervised at step " + std::to_string(i + 1);
        return false;
      }
    }
  }
  {
    TrainConfig mn = base;
    mn.method = Method::MixMatchNst;
    TrainConfig mm = base;
    mm.method = Method::MixMatch;
    TrainerSession a(mn, part), b(mm, part);
    for (int i = 0; i < 40; ++i) {
      a.step();
      b.step();
      if (!identical(a.params(), b.params())) {
        detail = "mixmatch-nst(lambda_e=0) diverged from mixmatch at step " + std::to_string(i + 1);
        return false;
      }
    }
  }
  detail = "both zero-weight pairs track bitwise for 40 steps";
  return true;
}

bool criterion_harness_determinism(std::string& detail) {
  ExperimentSpec spec;
  spec.dataset.kind = DataKind::TwoMoons;
  spec.dataset.n = 200;
  spec.dataset.noise = 0.1;
  spec.dataset.seed = 3;
  spec.split.n_test = 50;
  spec.split.mode = EquivMode::PerLabel;
  spec.methods = {Method::Supervised, Method::Nst};
  spec.n_labeled = {4, 8};
  spec.seeds = {1, 2, 3};
  spec.train.hidden_widths = {8};
  spec.train.steps = 20;
  spec.train.batch_labeled = 8;
  spec.train.batch_unlabeled = 8;
  spec.train.eval_interval = 20;

  fs::path dir = fs::temp_directory_path() / "nstlab_acceptance";
  fs::create_directories(dir);

  SweepResult first = run_sweep(spec, 2);
  SweepResult second = run_sweep(spec, sweep_jobs());
  write_aggregate_csv(first.aggregate, dir / "agg1.csv");
  write_aggregate_csv(second.aggregate, dir / "agg2.csv");
  if (slurp(dir / "agg1.csv") != slurp(dir / "agg2.csv")) {
    detail = "aggregate CSV differs across reruns";
    return false;
  }

  // raw rows are identical in every result field; the wall-clock column is
  // telemetry and excluded from the identity check
  if (first.raw.size() != second.raw.size()) {
    detail = "raw row count differs";
    return false;
  }
  for (std::size_t i = 0; i < first.raw.size(); ++i) {
    const ResultRow& a = first.raw[i];
    const ResultRow& b = second.raw[i];
    if (a.method != b.method || a.dataset != b.dataset || a.n_labeled != b.n_labeled ||
        a.seed != b.seed || a.test_error != b.test_error) {
      detail = "raw result fields differ across reruns";
      return false;
    }
  }

  std::vector<AggregateRow> recomputed = aggregate_rows(first.raw);
  if (recomputed.size() != first.aggregate.size()) {
    detail = "aggregate row count mismatch";
    return false;
  }
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    if (std::abs(recomputed[i].mean_error - first.aggregate[i].mean_error) >= 1e-12 ||
        std::abs(recomputed[i].std_error - first.aggregate[i].std_error) >= 1e-12) {
      detail = "recomputed aggregates disagree";
      return false;
    }
  }

  // grid search varies exactly one hyperparameter
  GridSpec grid;
  grid.param = "lambda_u";
  grid.values = {0.0, 50.0};
  grid.base = spec;
  grid.base.methods = {Method::MixMatchNst};
  grid.base.n_labeled = {8};
  grid.base.seeds = {1, 2};
  GridResult gresult = grid_search(grid, 2);
  for (const GridValueResult& gv : gresult.per_value) {
    TrainConfig reference = grid.base.train;
    reference.method = Method::MixMatchNst;
    reference.weights.lambda_u = gv.value;
    if (!(gv.config == reference)) {
      detail = "grid point changed more than one hyperparameter";
      return false;
    }
  }
  GridResult gagain = grid_search(grid, 1);
  fs::path g1 = dir / "grid1.csv", g2 = dir / "grid2.csv";
  write_grid_aggregate_csv(gresult, g1);
  write_grid_aggregate_csv(gagain, g2);
  if (slurp(g1) != slurp(g2)) {
    detail = "grid aggregate CSV differs across reruns";
    return false;
  }
  detail = "aggregate CSVs byte-identical; raw identical up to wall-clock; grids vary one knob";
  return true;
}

bool criterion_pca(std::string& detail) {
  MlpParams model;
  model.weights.push_back(Tensor::param({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  model.biases.push_back(Tensor::param({3}, {0, 0, 0}));
  model.weights.push_back(Tensor::param({3, 2}, {1, 0, 0, 1, 0, 0}));
  model.biases.push_back(Tensor::param({2}, {0, 0}));

  std::vector<double> data = {
      1.2, 2.1, 3.3,  2.2, 2.6, 2.9,  3.1, 3.4, 4.0,  4.4, 4.0, 5.3,  5.1, 5.6, 6.1,
      6.3, 6.0, 7.2,  7.2, 7.9, 8.0,  8.1, 8.3, 9.6,  9.2, 9.8, 9.7, 10.1, 10.5, 11.8,
  };
  Tensor x = Tensor::from({10, 3}, data);
  Embedding emb = embed_features(model, 1, x);
  if (emb.n != 10 || emb.coords.size() != 20) {
    detail = "embedding shape is not (n, 2)";
    return false;
  }

  std::vector<double> centered = data;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 10; ++r) mean += centered[r * 3 + c];
    mean /= 10.0;
    for (std::size_t r = 0; r < 10; ++r) centered[r * 3 + c] -= mean;
  }
  double cov[3][3] = {};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t r = 0; r < 10; ++r) cov[i][j] += centered[r * 3 + i] * centered[r * 3 + j];
      cov[i][j] /= 9.0;
    }
  auto power = [&](const double m[3][3]) {
    std::vector<double> v = {0.6, 0.5, 0.4};
    for (int it = 0; it < 20000; ++it) {
      double w[3] = {};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) w[i] += m[i][j] * v[j];
      double n = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
      for (int i = 0; i < 3; ++i) v[i] = w[i] / n;
    }
    return v;
  };
  std::vector<double> v1 = power(cov);
  double lambda1 = 0.0;
  for (int i = 0; i < 3; ++i) {
    double wi = 0.0;
    for (int j = 0; j < 3; ++j) wi += cov[i][j] * v1[j];
    lambda1 += v1[i] * wi;
  }
  double defl[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) defl[i][j] = cov[i][j] - lambda1 * v1[i] * v1[j];
  std::vector<double> v2 = power(defl);

  for (int axis = 0; axis < 2; ++axis) {
    const std::vector<double>& vec = axis == 0 ? v1 : v2;
    double same = 0.0, flip = 0.0;
    for (std::size_t r = 0; r < 10; ++r) {
      double proj = 0.0;
      for (std::size_t j = 0; j < 3; ++j) proj += centered[r * 3 + j] * vec[j];
      same = std::max(same, std::abs(proj - emb.coords[r * 2 + axis]));
      flip = std::max(flip, std::abs(proj + emb.coords[r * 2 + axis]));
    }
    if (std::min(same, flip) >= 1e-8) {
      detail = "projection disagrees with the eigendecomposition oracle";
      return false;
    }
  }
  detail = "matches brute-force eigendecomposition within 1e-8 up to sign";
  return true;
}

bool criterion_vat_direction(std::string& detail) {
  Rng init(2718);
  MlpParams model = init_params({{2, 3}, 0}, init);
  Tensor x = Tensor::from({1, 2}, {0.6, -0.4});

  auto kl_at = [&](double dx, double dy) {
    Tensor clean = predict_logits(model, x);
    std::vector<double> p(3), lp(3);
    {
      auto lv = clean.values();
      double mx = std::max({lv[0], lv[1], lv[2]});
      double denom = 0.0;
      for (int i = 0; i < 3; ++i) denom += std::exp(lv[i] - mx);
      for (int i = 0; i < 3; ++i) {
        lp[i] = lv[i] - mx - std::log(denom);
        p[i] = std::exp(lp[i]);
      }
    }
    Tensor pert = Tensor::from({1, 2}, {x[0] + dx, x[1] + dy});
    auto qv = predict_logits(model, pert).to_vector();
    double mx = std::max({qv[0], qv[1], qv[2]});
    double denom = 0.0;
    for (int i = 0; i < 3; ++i) denom += std::exp(qv[i] - mx);
    double kl = 0.0;
    for (int i = 0; i < 3; ++i) kl += p[i] * (lp[i] - (qv[i] - mx - std::log(denom)));
    return kl;
  };

  const double eps = 0.05;
  Rng vat_rng(14142);
  double kl_power = vat_loss(model, x, 1e-6, eps, 5, vat_rng).item();

  Rng search(173205);
  double kl_best = 0.0;
  for (int t = 0; t < 10000; ++t) {
    double angle = 2.0 * M_PI * search.uniform();
    kl_best = std::max(kl_best, kl_at(eps * std::cos(angle), eps * std::sin(angle)));
  }
  std::ostringstream os;
  os << "power " << kl_power << " vs best-of-10000 " << kl_best << " (ratio "
     << (kl_best > 0 ? kl_power / kl_best : 0.0) << ")";
  detail = os.str();
  return kl_best > 0.0 && kl_power >= 0.95 * kl_best;
}

}  // namespace

int main() {
  Runner runner;
  runner.run("1. gradient correctness: reverse mode vs finite differences on 20 random MLPs",
             criterion_gradients);
  runner.run("2. loss identity suite at 1e-12", criterion_loss_identities);
  runner.run("3. sharpening properties over 1000 simplex points", criterion_sharpening);
  runner.run("4. mixup properties over 1000 draws per alpha", criterion_mixup);
  runner.run("5. schedule contract: lambda_u linear rampup, lambda_e constant",
             criterion_schedules);
  runner.run("6. equivalence-class soundness (per-label and fixed-size)", criterion_equivalence);
  runner.run("7. desk-scale experiment 1: nst beats supervised on two-moons",
             criterion_experiment_one);
  runner.run("8. desk-scale experiment 2: mixmatch-nst <= mixmatch on 10-class blobs",
             criterion_experiment_two);
  runner.run("9. zero-weight degeneracy: identical parameter trajectories", criterion_zero_weight);
  runner.run("10. harness determinism and schema", criterion_harness_determinism);
  runner.run("11. pca embedding oracle", criterion_pca);
  runner.run("12. vat power-iteration direction quality", criterion_vat_direction);

  if (runner.failures == 0) {
    std::printf("all 12 acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", runner.failures);
  }
  return runner.failures == 0 ? 0 : 1;
}
