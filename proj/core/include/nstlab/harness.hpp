#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nstlab/config.hpp"
#include "nstlab/trainer.hpp"

namespace nst {

struct ResultRow {
  std::string method;
  std::string dataset;
  std::size_t n_labeled = 0;
  std::uint64_t seed = 0;
  double test_error = 1.0;  // fractional, in [0, 1]
  double seconds = 0.0;
};

struct AggregateRow {
  std::string method;
  std::string dataset;
  std::size_t n_labeled = 0;
  double mean_error = 0.0;
  double std_error = 0.0;  // sample standard deviation (n-1)
  std::size_t n_seeds = 0;
};

struct ErrorRow {
  std::string method;
  std::string dataset;
  std::size_t n_labeled = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct SweepResult {
  std::vector<ResultRow> raw;
  std::vector<AggregateRow> aggregate;
  std::vector<ErrorRow> errors;
};

/// One training run per (method, n_labeled, seed) cell; failures become error
/// rows and the sweep continues. Cells may run on `jobs` threads; rows are
/// sorted by (method, n_labeled, seed) before aggregation so the output is
/// order-independent.
SweepResult run_sweep(const ExperimentSpec& spec, std::size_t jobs = 1);

/// Aggregation used by run_sweep, exposed for recomputation checks.
std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& raw);

struct GridValueResult {
  double value = 0.0;
  TrainConfig config;  // base config with exactly the searched field replaced
  SweepResult sweep;
};

struct GridResult {
  std::string param;
  std::vector<GridValueResult> per_value;
  double selected_value = 0.0;  // argmin of aggregate mean error
};

GridResult grid_search(const GridSpec& spec, std::size_t jobs = 1);

/// Raw schema:       method,dataset,n_labeled,seed,test_error,seconds
/// Aggregate schema: method,dataset,n_labeled,mean_error,std_error,n_seeds
/// Grid files carry the same columns prefixed by param,value.
void write_raw_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
void write_error_csv(const std::vector<ErrorRow>& rows, const std::filesystem::path& path);
void write_grid_raw_csv(const GridResult& result, const std::filesystem::path& path);
void write_grid_aggregate_csv(const GridResult& result, const std::filesystem::path& path);

std::vector<ResultRow> read_raw_csv(const std::filesystem::path& path);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);

/// Builds the split (and equivalence classes when the train method needs
/// them) for one sweep cell.
PartialDataset prepare_cell(const Dataset& dataset, const ExperimentSpec& spec,
                            std::size_t n_labeled, std::uint64_t seed);

}  // namespace nst
