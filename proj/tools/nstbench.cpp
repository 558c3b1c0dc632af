// nstbench: batch harness for the semi-supervised experiments.
//
// Subcommands: gen-data, train, sweep, grid-search, plot, embed. Every
// command is deterministic given its inputs and writes fixed-named artifacts
// into --out.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "nstlab/config.hpp"
#include "nstlab/harness.hpp"
#include "nstlab/pca.hpp"
#include "nstlab/svgplot.hpp"

namespace fs = std::filesystem;
using namespace nst;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

fs::path ensure_out_dir(const GlobalOptions& opts) {
  fs::path dir(opts.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
  }
  return dir;
}

ExperimentSpec load_experiment(const GlobalOptions& opts) {
  if (opts.config_path.empty()) {
    throw Error(ErrorKind::Config, "this command needs --config");
  }
  ConfigSpec spec = parse_config(opts.config_path);
  if (!std::holds_alternative<ExperimentSpec>(spec)) {
    throw Error(ErrorKind::Config, "expected a sweep config (kind = \"sweep\")");
  }
  return std::get<ExperimentSpec>(spec);
}

GridSpec load_grid(const GlobalOptions& opts) {
  if (opts.config_path.empty()) {
    throw Error(ErrorKind::Config, "this command needs --config");
  }
  ConfigSpec spec = parse_config(opts.config_path);
  if (!std::holds_alternative<GridSpec>(spec)) {
    throw Error(ErrorKind::Config, "expected a grid config (kind = \"grid-search\")");
  }
  return std::get<GridSpec>(spec);
}

int cmd_gen_data(const GlobalOptions& opts, const DataSpec& flags, bool have_config) {
  DataSpec spec = flags;
  if (have_config) {
    spec = load_experiment(opts).dataset;
  }
  if (opts.seed) spec.seed = *opts.seed;
  Dataset dataset = make_dataset(spec);
  fs::path out = ensure_out_dir(opts) / "dataset.csv";
  save_dataset_csv(dataset, out);
  std::cout << "wrote " << out.string() << " (" << dataset.n() << " rows, " << dataset.d()
            << " features, " << dataset.k << " classes)\n";
  return 0;
}

int cmd_train(const GlobalOptions& opts) {
  ExperimentSpec spec = load_experiment(opts);
  std::uint64_t seed = opts.seed ? *opts.seed : spec.seeds.front();
  Dataset dataset = make_dataset(spec.dataset);
  PartialDataset partial = prepare_cell(dataset, spec, spec.n_labeled.front(), seed);
  TrainConfig config = spec.train;
  config.method = spec.methods.front();
  config.seed = seed;
  MlpParams final_params;
  RunResult result = train(config, partial, &final_params);

  fs::path dir = ensure_out_dir(opts);
  {
    std::ofstream os(dir / "history.csv");
    os << "step,train_loss,validation_error,test_error\n";
    char buf[64];
    for (const EvalPoint& p : result.history) {
      std::snprintf(buf, sizeof buf, "%.12g", p.train_loss);
      os << p.step << "," << buf << ",";
      if (p.validation_error) {
        std::snprintf(buf, sizeof buf, "%.12g", *p.validation_error);
        os << buf;
      }
      std::snprintf(buf, sizeof buf, "%.12g", p.test_error);
      os << "," << buf << "\n";
    }
  }
  save_params(final_params, dir / "model.ntpm");

  std::cout << method_name(config.method) << " seed " << seed << ": final test error "
            << result.final_test_error << " (" << result.seconds << " s)\n";
  std::cout << "wrote " << (dir / "history.csv").string() << " and " << (dir / "model.ntpm").string()
            << "\n";
  return 0;
}

int cmd_sweep(const GlobalOptions& opts) {
  ExperimentSpec spec = load_experiment(opts);
  SweepResult result = run_sweep(spec, opts.jobs);
  fs::path dir = ensure_out_dir(opts);
  write_raw_csv(result.raw, dir / "results_raw.csv");
  write_aggregate_csv(result.aggregate, dir / "results_aggregate.csv");
  if (!result.errors.empty()) write_error_csv(result.errors, dir / "errors.csv");

  std::cout << "method            n_labeled  mean_error  std_error  seeds\n";
  for (const AggregateRow& r : result.aggregate) {
    std::printf("%-17s %9zu  %10.4f  %9.4f  %5zu\n", r.method.c_str(), r.n_labeled, r.mean_error,
                r.std_error, r.n_seeds);
  }
  if (!result.errors.empty()) {
    std::cout << result.errors.size() << " run(s) failed; see errors.csv\n";
  }
  std::cout << "wrote " << (dir / "results_raw.csv").string() << "\n";
  return result.raw.empty() ? 1 : 0;
}

int cmd_grid_search(const GlobalOptions& opts) {
  GridSpec spec = load_grid(opts);
  GridResult result = grid_search(spec, opts.jobs);
  fs::path dir = ensure_out_dir(opts);
  write_grid_raw_csv(result, dir / "grid_raw.csv");
  write_grid_aggregate_csv(result, dir / "grid_aggregate.csv");
  {
    std::ofstream os(dir / "grid_selected.txt");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", result.selected_value);
    os << result.param << " = " << buf << "\n";
  }
  std::cout << "param " << result.param << ": selected value " << result.selected_value << "\n";
  for (const GridValueResult& gv : result.per_value) {
    for (const AggregateRow& r : gv.sweep.aggregate) {
      std::printf("  %s = %-8g mean_error %.4f (+/- %.4f)\n", result.param.c_str(), gv.value,
                  r.mean_error, r.std_error);
    }
  }
  std::cout << "wrote " << (dir / "grid_raw.csv").string() << "\n";
  return 0;
}

int cmd_plot(const GlobalOptions& opts, const std::string& csv) {
  fs::path out = ensure_out_dir(opts) / "curves.svg";
  plot_curves(csv, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_embed(const GlobalOptions& opts, const std::string& model_path, const std::string& data_path,
              std::size_t layer) {
  MlpParams params = load_params(model_path);
  Dataset dataset = load_dataset_csv(data_path);
  Embedding embedding = embed_features(params, layer, dataset.features);
  fs::path out = ensure_out_dir(opts) / "embedding.csv";
  write_embedding_csv(embedding, dataset.labels, out);
  std::cout << "wrote " << out.string() << " (" << embedding.n << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised learning benchmark harness"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "TOML config file")->configurable(false);
  app.add_option("--out", opts.out_dir, "output directory (default .)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "seed override");
  app.add_option("--jobs", opts.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
  std::string gen_kind = "two-moons";
  DataSpec gen_spec;
  gen->add_option("--kind", gen_kind, "two-moons | blobs | rings");
  gen->add_option("--n", gen_spec.n, "number of examples");
  gen->add_option("--noise", gen_spec.noise, "noise level (two-moons / rings)");
  gen->add_option("--k", gen_spec.k, "class count (blobs)");
  gen->add_option("--spread", gen_spec.spread, "cluster stddev (blobs)");

  auto* train_cmd = app.add_subcommand("train", "run one training cell from a sweep config");
  auto* sweep_cmd = app.add_subcommand("sweep", "run a (method x n_labeled x seed) sweep");
  auto* grid_cmd = app.add_subcommand("grid-search", "univariate hyperparameter grid search");

  auto* plot_cmd = app.add_subcommand("plot", "render an aggregate CSV as SVG curves");
  std::string plot_csv;
  plot_cmd->add_option("--csv", plot_csv, "aggregate results CSV")->required();

  auto* embed_cmd = app.add_subcommand("embed", "2D PCA embedding of hidden activations");
  std::string embed_model, embed_data;
  std::size_t embed_layer = 1;
  embed_cmd->add_option("--model", embed_model, "model file (.ntpm)")->required();
  embed_cmd->add_option("--data", embed_data, "dataset CSV")->required();
  embed_cmd->add_option("--layer", embed_layer, "1..hidden-count for hidden layers, last = softmax");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed = seed_value;

  try {
    if (gen->parsed()) {
      gen_spec.kind = data_kind_from_name(gen_kind);
      return cmd_gen_data(opts, gen_spec, !opts.config_path.empty());
    }
    if (train_cmd->parsed()) return cmd_train(opts);
    if (sweep_cmd->parsed()) return cmd_sweep(opts);
    if (grid_cmd->parsed()) return cmd_grid_search(opts);
    if (plot_cmd->parsed()) return cmd_plot(opts, plot_csv);
    if (embed_cmd->parsed()) return cmd_embed(opts, embed_model, embed_data, embed_layer);
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
