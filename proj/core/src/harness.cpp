#include "nstlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace nst {

namespace {

struct Cell {
  Method method;
  std::size_t n_labeled;
  std::uint64_t seed;
};

std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  cells.reserve(spec.methods.size() * spec.n_labeled.size() * spec.seeds.size());
  for (Method m : spec.methods)
    for (std::size_t n : spec.n_labeled)
      for (std::uint64_t s : spec.seeds) cells.push_back({m, n, s});
  return cells;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  return std::tie(a.method, a.n_labeled, a.seed) < std::tie(b.method, b.n_labeled, b.seed);
}

std::string fmt_err(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt_sec(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

PartialDataset prepare_cell(const Dataset& dataset, const ExperimentSpec& spec,
                            std::size_t n_labeled, std::uint64_t seed) {
  PartialDataset partial =
      split_semi(dataset, n_labeled, spec.split.n_validation, spec.split.n_test, seed);
  return build_equivalence_classes(std::move(partial), spec.split.mode, spec.split.class_size, seed);
}

SweepResult run_sweep(const ExperimentSpec& spec, std::size_t jobs) {
  Dataset dataset = make_dataset(spec.dataset);
  std::string dataset_name = data_kind_name(spec.dataset.kind);
  std::vector<Cell> cells = enumerate_cells(spec);

  struct Outcome {
    bool ok = false;
    ResultRow row;
    ErrorRow error;
  };
  std::vector<Outcome> outcomes(cells.size());

  auto run_cell = [&](std::size_t index) {
    const Cell& cell = cells[index];
    Outcome& out = outcomes[index];
    out.row.method = out.error.method = method_name(cell.method);
    out.row.dataset = out.error.dataset = dataset_name;
    out.row.n_labeled = out.error.n_labeled = cell.n_labeled;
    out.row.seed = out.error.seed = cell.seed;
    try {
      PartialDataset partial = prepare_cell(dataset, spec, cell.n_labeled, cell.seed);
      TrainConfig config = spec.train;
      config.method = cell.method;
      config.seed = cell.seed;
      RunResult result = train(config, partial);
      out.row.test_error = result.final_test_error;
      out.row.seconds = result.seconds;
      out.ok = true;
    } catch (const std::exception& e) {
      out.error.message = e.what();
    }
  };

  if (jobs <= 1 || cells.size() <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::size_t workers = std::min(jobs, cells.size());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t index;
          {
            std::lock_guard lock(next_mutex);
            if (next >= cells.size()) return;
            index = next++;
          }
          run_cell(index);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  SweepResult result;
  for (Outcome& out : outcomes) {
    if (out.ok) {
      result.raw.push_back(std::move(out.row));
    } else {
      result.errors.push_back(std::move(out.error));
    }
  }
  std::sort(result.raw.begin(), result.raw.end(), row_less);
  result.aggregate = aggregate_rows(result.raw);
  return result;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& raw) {
  std::vector<ResultRow> rows = raw;
  std::sort(rows.begin(), rows.end(), row_less);
  std::vector<AggregateRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < rows.size() && rows[j].method == rows[i].method &&
           rows[j].n_labeled == rows[i].n_labeled) {
      sum += rows[j].test_error;
      ++j;
    }
    std::size_t count = j - i;
    double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t t = i; t < j; ++t) {
      double dev = rows[t].test_error - mean;
      ss += dev * dev;
    }
    AggregateRow agg;
    agg.method = rows[i].method;
    agg.dataset = rows[i].dataset;
    agg.n_labeled = rows[i].n_labeled;
    agg.mean_error = mean;
    agg.std_error = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
    agg.n_seeds = count;
    out.push_back(agg);
    i = j;
  }
  return out;
}

GridResult grid_search(const GridSpec& spec, std::size_t jobs) {
  if (spec.values.empty()) {
    throw Error(ErrorKind::Config, "grid_search: empty value grid");
  }
  GridResult result;
  result.param = spec.param;
  double best_mean = std::numeric_limits<double>::infinity();
  for (double value : spec.values) {
    ExperimentSpec point = spec.base;
    if (spec.param == "alpha") {
      point.train.mix.alpha = value;
    } else if (spec.param == "lambda_u") {
      point.train.weights.lambda_u = value;
    } else if (spec.param == "lambda_e") {
      point.train.weights.lambda_e = value;
    } else {
      throw Error(ErrorKind::Config, "grid_search: unknown param \"" + spec.param + "\"");
    }
    GridValueResult gv;
    gv.value = value;
    gv.config = point.train;
    gv.config.method = point.methods[0];
    gv.sweep = run_sweep(point, jobs);
    if (!gv.sweep.aggregate.empty() && gv.sweep.aggregate[0].mean_error < best_mean) {
      best_mean = gv.sweep.aggregate[0].mean_error;
      result.selected_value = value;
    }
    result.per_value.push_back(std::move(gv));
  }
  if (!std::isfinite(best_mean)) {
    throw Error(ErrorKind::Config, "grid_search: no grid point produced a result");
  }
  return result;
}

void write_raw_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_raw_csv: cannot open " + path.string());
  os << "method,dataset,n_labeled,seed,test_error,seconds\n";
  for (const ResultRow& r : rows) {
    os << r.method << "," << r.dataset << "," << r.n_labeled << "," << r.seed << ","
       << fmt_err(r.test_error) << "," << fmt_sec(r.seconds) << "\n";
  }
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_aggregate_csv: cannot open " + path.string());
  os << "method,dataset,n_labeled,mean_error,std_error,n_seeds\n";
  for (const AggregateRow& r : rows) {
    os << r.method << "," << r.dataset << "," << r.n_labeled << "," << fmt_err(r.mean_error) << ","
       << fmt_err(r.std_error) << "," << r.n_seeds << "\n";
  }
}

void write_error_csv(const std::vector<ErrorRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_error_csv: cannot open " + path.string());
  os << "method,dataset,n_labeled,seed,error\n";
  for (const ErrorRow& r : rows) {
    std::string msg = r.message;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    os << r.method << "," << r.dataset << "," << r.n_labeled << "," << r.seed << "," << msg << "\n";
  }
}

void write_grid_raw_csv(const GridResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_grid_raw_csv: cannot open " + path.string());
  os << "param,value,method,dataset,n_labeled,seed,test_error,seconds\n";
  for (const GridValueResult& gv : result.per_value) {
    for (const ResultRow& r : gv.sweep.raw) {
      os << result.param << "," << fmt_err(gv.value) << "," << r.method << "," << r.dataset << ","
         << r.n_labeled << "," << r.seed << "," << fmt_err(r.test_error) << ","
         << fmt_sec(r.seconds) << "\n";
    }
  }
}

void write_grid_aggregate_csv(const GridResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "write_grid_aggregate_csv: cannot open " + path.string());
  os << "param,value,method,dataset,n_labeled,mean_error,std_error,n_seeds\n";
  for (const GridValueResult& gv : result.per_value) {
    for (const AggregateRow& r : gv.sweep.aggregate) {
      os << result.param << "," << fmt_err(gv.value) << "," << r.method << "," << r.dataset << ","
         << r.n_labeled << "," << fmt_err(r.mean_error) << "," << fmt_err(r.std_error) << ","
         << r.n_seeds << "\n";
    }
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

double parse_double(const std::string& cell, std::size_t line_no, const char* file) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, std::string(file) + ": bad numeric cell \"" + cell +
                                      "\" at line " + std::to_string(line_no));
  }
}

std::size_t parse_count(const std::string& cell, std::size_t line_no, const char* file) {
  double v = parse_double(cell, line_no, file);
  if (v < 0 || v != std::floor(v)) {
    throw Error(ErrorKind::Parse, std::string(file) + ": bad count \"" + cell + "\" at line " +
                                      std::to_string(line_no));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<ResultRow> read_raw_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "read_raw_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      split_line(line) != std::vector<std::string>{"method", "dataset", "n_labeled", "seed",
                                                   "test_error", "seconds"}) {
    throw Error(ErrorKind::Parse, "read_raw_csv: bad header at line 1");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != 6) {
      throw Error(ErrorKind::Parse, "read_raw_csv: expected 6 cells at line " + std::to_string(line_no));
    }
    ResultRow r;
    r.method = cells[0];
    r.dataset = cells[1];
    r.n_labeled = parse_count(cells[2], line_no, "read_raw_csv");
    r.seed = parse_count(cells[3], line_no, "read_raw_csv");
    r.test_error = parse_double(cells[4], line_no, "read_raw_csv");
    r.seconds = parse_double(cells[5], line_no, "read_raw_csv");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "read_aggregate_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      split_line(line) != std::vector<std::string>{"method", "dataset", "n_labeled", "mean_error",
                                                   "std_error", "n_seeds"}) {
    throw Error(ErrorKind::Parse, "read_aggregate_csv: bad header at line 1");
  }
  std::vector<AggregateRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != 6) {
      throw Error(ErrorKind::Parse,
                  "read_aggregate_csv: expected 6 cells at line " + std::to_string(line_no));
    }
    AggregateRow r;
    r.method = cells[0];
    r.dataset = cells[1];
    r.n_labeled = parse_count(cells[2], line_no, "read_aggregate_csv");
    r.mean_error = parse_double(cells[3], line_no, "read_aggregate_csv");
    r.std_error = parse_double(cells[4], line_no, "read_aggregate_csv");
    r.n_seeds = parse_count(cells[5], line_no, "read_aggregate_csv");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nst
