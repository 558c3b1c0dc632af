#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "nstlab/data.hpp"
#include "nstlab/trainer.hpp"

namespace nst {

struct SplitSpec {
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  EquivMode mode = EquivMode::PerLabel;
  std::size_t class_size = 2;  // FixedSize only

  bool operator==(const SplitSpec&) const = default;
};

struct ExperimentSpec {
  DataSpec dataset;
  SplitSpec split;
  std::vector<Method> methods;
  std::vector<std::size_t> n_labeled;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;  // template; method and seed filled per sweep cell

  bool operator==(const ExperimentSpec&) const = default;
};

/// Univariate grid over one hyperparameter; the other two stay at the base
/// config's values.
struct GridSpec {
  std::string param;  // "alpha" | "lambda_u" | "lambda_e"
  std::vector<double> values;
  ExperimentSpec base;  // exactly one method and one n_labeled

  bool operator==(const GridSpec&) const = default;
};

using ConfigSpec = std::variant<ExperimentSpec, GridSpec>;

/// Strict parse: unknown sections or keys are configuration errors naming the
/// offender; missing keys take documented defaults. The top-level `kind` key
/// ("sweep" or "grid-search") selects the variant.
ConfigSpec parse_config(const std::filesystem::path& path);
ConfigSpec parse_config_text(const std::string& text);

std::string serialize_config(const ExperimentSpec& spec);
std::string serialize_config(const GridSpec& spec);

}  // namespace nst
