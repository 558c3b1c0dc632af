#include "nstlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nstlab/toml.hpp"

namespace nst {

namespace {

using toml::Table;
using toml::Value;

/// Tracks consumed keys so leftovers can be reported by name.
class SectionReader {
public:
  SectionReader(const Table& table, std::string section) : section_(std::move(section)) {
    auto it = table.find(section_);
    if (it != table.end()) entries_ = &it->second;
  }

  const Value* get(const std::string& key) {
    seen_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  void finish() const {
    if (!entries_) return;
    for (const auto& [key, value] : *entries_) {
      if (!seen_.contains(key)) {
        std::string where = section_.empty() ? "top level" : "[" + section_ + "]";
        throw Error(ErrorKind::Config, "config: unknown key \"" + key + "\" in " + where +
                                           " (line " + std::to_string(value.line) + ")");
      }
    }
  }

private:
  std::string section_;
  const std::map<std::string, Value>* entries_ = nullptr;
  std::set<std::string> seen_;
};

std::size_t as_count(const Value& v, const std::string& key) {
  std::int64_t i = v.as_int();
  if (i < 0) throw Error(ErrorKind::Config, "config: \"" + key + "\" must be nonnegative");
  return static_cast<std::size_t>(i);
}

DataSpec read_dataset(const Table& table) {
  SectionReader sec(table, "dataset");
  DataSpec spec;
  if (const Value* v = sec.get("kind")) spec.kind = data_kind_from_name(v->as_string());
  if (const Value* v = sec.get("n")) spec.n = as_count(*v, "n");
  if (const Value* v = sec.get("noise")) spec.noise = v->as_float();
  if (const Value* v = sec.get("k")) spec.k = as_count(*v, "k");
  if (const Value* v = sec.get("spread")) spec.spread = v->as_float();
  if (const Value* v = sec.get("seed")) spec.seed = static_cast<std::uint64_t>(v->as_int());
  sec.finish();
  return spec;
}

SplitSpec read_split(const Table& table) {
  SectionReader sec(table, "split");
  SplitSpec spec;
  if (const Value* v = sec.get("n_validation")) spec.n_validation = as_count(*v, "n_validation");
  if (const Value* v = sec.get("n_test")) spec.n_test = as_count(*v, "n_test");
  if (const Value* v = sec.get("equivalence")) {
    const std::string& name = v->as_string();
    if (name == "per-label") {
      spec.mode = EquivMode::PerLabel;
    } else if (name == "fixed-size") {
      spec.mode = EquivMode::FixedSize;
    } else {
      throw Error(ErrorKind::Config, "config: unknown equivalence mode \"" + name + "\"");
    }
  }
  if (const Value* v = sec.get("class_size")) spec.class_size = as_count(*v, "class_size");
  sec.finish();
  return spec;
}

TrainConfig read_train(const Table& table) {
  SectionReader sec(table, "train");
  TrainConfig config;
  if (const Value* v = sec.get("hidden")) {
    config.hidden_widths.clear();
    for (const Value& item : v->as_array()) config.hidden_widths.push_back(as_count(item, "hidden"));
  }
  if (const Value* v = sec.get("learning_rate")) config.learning_rate = v->as_float();
  if (const Value* v = sec.get("steps")) config.steps = as_count(*v, "steps");
  if (const Value* v = sec.get("batch_labeled")) config.batch_labeled = as_count(*v, "batch_labeled");
  if (const Value* v = sec.get("batch_unlabeled"))
    config.batch_unlabeled = as_count(*v, "batch_unlabeled");
  if (const Value* v = sec.get("lambda")) config.weights.lambda = v->as_float();
  if (const Value* v = sec.get("lambda_u")) config.weights.lambda_u = v->as_float();
  if (const Value* v = sec.get("lambda_e")) config.weights.lambda_e = v->as_float();
  if (const Value* v = sec.get("alpha")) config.mix.alpha = v->as_float();
  if (const Value* v = sec.get("temperature")) config.mix.temperature = v->as_float();
  if (const Value* v = sec.get("k_augment")) config.mix.k_augment = as_count(*v, "k_augment");
  if (const Value* v = sec.get("rampup")) config.rampup_steps = as_count(*v, "rampup");
  if (const Value* v = sec.get("ema_decay")) config.ema_decay = v->as_float();
  if (const Value* v = sec.get("pseudo_threshold")) config.pseudo_threshold = v->as_float();
  if (const Value* v = sec.get("vat_xi")) config.vat.xi = v->as_float();
  if (const Value* v = sec.get("vat_eps")) config.vat.eps = v->as_float();
  if (const Value* v = sec.get("vat_power_iters"))
    config.vat.n_power = static_cast<int>(v->as_int());
  if (const Value* v = sec.get("weight_decay")) config.weight_decay = v->as_float();
  if (const Value* v = sec.get("eval_interval")) config.eval_interval = as_count(*v, "eval_interval");
  if (const Value* v = sec.get("augment")) config.augment.kind = augment_kind_from_name(v->as_string());
  if (const Value* v = sec.get("augment_sigma")) config.augment.sigma = v->as_float();
  if (const Value* v = sec.get("augment_flip_p")) config.augment.flip_p = v->as_float();
  sec.finish();
  return config;
}

void read_sweep_axes(const Table& table, ExperimentSpec& spec) {
  SectionReader sec(table, "sweep");
  if (const Value* v = sec.get("methods")) {
    spec.methods.clear();
    for (const Value& item : v->as_array()) spec.methods.push_back(method_from_name(item.as_string()));
  }
  if (const Value* v = sec.get("n_labeled")) {
    spec.n_labeled.clear();
    for (const Value& item : v->as_array()) spec.n_labeled.push_back(as_count(item, "n_labeled"));
  }
  if (const Value* v = sec.get("seeds")) {
    spec.seeds.clear();
    for (const Value& item : v->as_array())
      spec.seeds.push_back(static_cast<std::uint64_t>(item.as_int()));
  }
  sec.finish();
}

void validate_experiment(const ExperimentSpec& spec) {
  if (spec.methods.empty() || spec.n_labeled.empty() || spec.seeds.empty()) {
    throw Error(ErrorKind::Config, "config: methods, n_labeled and seeds must be nonempty");
  }
  std::set<std::uint64_t> distinct(spec.seeds.begin(), spec.seeds.end());
  if (distinct.size() != spec.seeds.size()) {
    throw Error(ErrorKind::Config, "config: seeds must be distinct");
  }
}

ExperimentSpec read_experiment(const Table& table) {
  ExperimentSpec spec;
  spec.dataset = read_dataset(table);
  spec.split = read_split(table);
  spec.methods = {Method::Supervised};
  spec.n_labeled = {spec.dataset.n / 10 > 0 ? spec.dataset.n / 10 : 1};
  spec.seeds = {1, 2, 3, 4, 5};
  read_sweep_axes(table, spec);
  spec.train = read_train(table);
  validate_experiment(spec);
  return spec;
}

GridSpec read_grid(const Table& table) {
  GridSpec grid;
  grid.base = read_experiment(table);
  SectionReader sec(table, "grid");
  if (const Value* v = sec.get("param")) grid.param = v->as_string();
  if (const Value* v = sec.get("values")) {
    for (const Value& item : v->as_array()) grid.values.push_back(item.as_float());
  }
  sec.finish();
  if (grid.param != "alpha" && grid.param != "lambda_u" && grid.param != "lambda_e") {
    throw Error(ErrorKind::Config,
                "config: grid param must be alpha, lambda_u or lambda_e, got \"" + grid.param + "\"");
  }
  if (grid.values.empty()) {
    throw Error(ErrorKind::Config, "config: grid values must be nonempty");
  }
  for (double v : grid.values) {
    if (grid.param == "alpha" ? v <= 0.0 : v < 0.0) {
      throw Error(ErrorKind::Config, "config: grid value out of range for " + grid.param);
    }
  }
  if (grid.base.methods.size() != 1 || grid.base.n_labeled.size() != 1) {
    throw Error(ErrorKind::Config, "config: grid search needs exactly one method and one n_labeled");
  }
  return grid;
}

}  // namespace

ConfigSpec parse_config_text(const std::string& text) {
  Table table = toml::parse(text);
  SectionReader top(table, "");
  std::string kind = "sweep";
  if (const Value* v = top.get("kind")) kind = v->as_string();
  top.finish();

  std::set<std::string> known = {"", "dataset", "split", "sweep", "train"};
  if (kind == "grid-search") known.insert("grid");
  for (const auto& [section, entries] : table) {
    (void)entries;
    if (!known.contains(section)) {
      throw Error(ErrorKind::Config, "config: unknown section [" + section + "]");
    }
  }

  if (kind == "sweep") return read_experiment(table);
  if (kind == "grid-search") return read_grid(table);
  throw Error(ErrorKind::Config, "config: kind must be \"sweep\" or \"grid-search\", got \"" + kind + "\"");
}

ConfigSpec parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "config: cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // keep floats distinguishable from ints for the round trip
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

void write_common(std::ostringstream& os, const ExperimentSpec& spec) {
  os << "[dataset]\n";
  os << "kind = " << toml::encode_string(data_kind_name(spec.dataset.kind)) << "\n";
  os << "n = " << spec.dataset.n << "\n";
  os << "noise = " << fmt_double(spec.dataset.noise) << "\n";
  os << "k = " << spec.dataset.k << "\n";
  os << "spread = " << fmt_double(spec.dataset.spread) << "\n";
  os << "seed = " << spec.dataset.seed << "\n";
  os << "\n[split]\n";
  os << "n_validation = " << spec.split.n_validation << "\n";
  os << "n_test = " << spec.split.n_test << "\n";
  os << "equivalence = "
     << (spec.split.mode == EquivMode::PerLabel ? "\"per-label\"" : "\"fixed-size\"") << "\n";
  os << "class_size = " << spec.split.class_size << "\n";
  os << "\n[sweep]\n";
  os << "methods = [";
  for (std::size_t i = 0; i < spec.methods.size(); ++i) {
    os << (i ? ", " : "") << toml::encode_string(method_name(spec.methods[i]));
  }
  os << "]\n";
  os << "n_labeled = [";
  for (std::size_t i = 0; i < spec.n_labeled.size(); ++i) os << (i ? ", " : "") << spec.n_labeled[i];
  os << "]\n";
  os << "seeds = [";
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) os << (i ? ", " : "") << spec.seeds[i];
  os << "]\n";
  const TrainConfig& t = spec.train;
  os << "\n[train]\n";
  os << "hidden = [";
  for (std::size_t i = 0; i < t.hidden_widths.size(); ++i) os << (i ? ", " : "") << t.hidden_widths[i];
  os << "]\n";
  os << "learning_rate = " << fmt_double(t.learning_rate) << "\n";
  os << "steps = " << t.steps << "\n";
  os << "batch_labeled = " << t.batch_labeled << "\n";
  os << "batch_unlabeled = " << t.batch_unlabeled << "\n";
  os << "lambda = " << fmt_double(t.weights.lambda) << "\n";
  os << "lambda_u = " << fmt_double(t.weights.lambda_u) << "\n";
  os << "lambda_e = " << fmt_double(t.weights.lambda_e) << "\n";
  os << "alpha = " << fmt_double(t.mix.alpha) << "\n";
  os << "temperature = " << fmt_double(t.mix.temperature) << "\n";
  os << "k_augment = " << t.mix.k_augment << "\n";
  os << "rampup = " << t.rampup_steps << "\n";
  os << "ema_decay = " << fmt_double(t.ema_decay) << "\n";
  os << "pseudo_threshold = " << fmt_double(t.pseudo_threshold) << "\n";
  os << "vat_xi = " << fmt_double(t.vat.xi) << "\n";
  os << "vat_eps = " << fmt_double(t.vat.eps) << "\n";
  os << "vat_power_iters = " << t.vat.n_power << "\n";
  os << "weight_decay = " << fmt_double(t.weight_decay) << "\n";
  os << "eval_interval = " << t.eval_interval << "\n";
  os << "augment = " << toml::encode_string(augment_kind_name(t.augment.kind)) << "\n";
  os << "augment_sigma = " << fmt_double(t.augment.sigma) << "\n";
  os << "augment_flip_p = " << fmt_double(t.augment.flip_p) << "\n";
}

}  // namespace

std::string serialize_config(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "kind = \"sweep\"\n\n";
  write_common(os, spec);
  return os.str();
}

std::string serialize_config(const GridSpec& spec) {
  std::ostringstream os;
  os << "kind = \"grid-search\"\n\n";
  write_common(os, spec.base);
  os << "\n[grid]\n";
  os << "param = " << toml::encode_string(spec.param) << "\n";
  os << "values = [";
  for (std::size_t i = 0; i < spec.values.size(); ++i) os << (i ? ", " : "") << fmt_double(spec.values[i]);
  os << "]\n";
  return os.str();
}

}  // namespace nst
