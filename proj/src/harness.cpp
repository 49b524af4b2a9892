// Copyright 2026 The SBC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include "sbc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sbc/errors.hpp"

namespace sbc {

using nlohmann::json;

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Typed access to one JSON object with field-path diagnostics. Unknown keys
// are rejected by finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    seen_.insert(key);
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true/false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
        fail(key, "expected a non-negative integer");
      }
    } else {
      if (!v.is_number()) fail(key, "expected a number");
    }
    return v.get<T>();
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), name(key));
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config field '" + (key.empty() ? path_ : name(key)) +
                      "': " + what);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
std::vector<T> number_list(Section& s, const std::string& key) {
  const json& v = s.raw(key);
  if (!v.is_array() || v.empty()) s.fail(key, "expected a non-empty array");
  std::vector<T> out;
  for (const auto& e : v) {
    if (!e.is_number()) s.fail(key, "expected numbers");
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer() || e.get<long long>() < 1) {
        s.fail(key, "expected positive integers");
      }
    }
    out.push_back(e.get<T>());
  }
  return out;
}

DatasetKind dataset_kind(Section& s, const std::string& name) {
  if (name == "blobs") return DatasetKind::kBlobs;
  if (name == "linreg") return DatasetKind::kLinreg;
  if (name == "xor" || name == "xor-ish") return DatasetKind::kXor;
  s.fail("kind", "unknown dataset kind '" + name + "'");
}

ModelKind model_kind(Section& s, const std::string& name) {
  if (name == "linear" || name == "linear-regression") return ModelKind::kLinearRegression;
  if (name == "logistic" || name == "logistic-regression") return ModelKind::kLogisticRegression;
  if (name == "mlp" || name == "mlp-1-hidden") return ModelKind::kMlp;
  s.fail("kind", "unknown model kind '" + name + "'");
}

OptimizerKind optimizer_kind(Section& s, const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  s.fail("kind", "unknown optimizer '" + name + "'");
}

CompressionMode compression_mode(Section& s, const std::string& name) {
  if (name == "identity") return CompressionMode::kIdentity;
  if (name == "sbc" || name == "sparse-binary") return CompressionMode::kSparseBinary;
  if (name == "topk" || name == "top-k-with-values") return CompressionMode::kTopKValues;
  s.fail("mode", "unknown compression mode '" + name + "'");
}

template <typename T>
void push_unique(std::vector<T>& v, T x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

void axes_from_cells(ExperimentSpec& spec) {
  spec.grid_n.clear();
  spec.grid_p.clear();
  for (const auto& c : spec.cells) {
    push_unique(spec.grid_n, c.n);
    push_unique(spec.grid_p, c.p);
  }
  std::sort(spec.grid_n.begin(), spec.grid_n.end());
  std::sort(spec.grid_p.begin(), spec.grid_p.end(), std::greater<double>());
}

}  // namespace

void ExperimentSpec::validate() const {
  rounds.validate();
  if (cells.empty()) throw ConfigError("config field 'grid': no cells to run");
  for (const auto& c : cells) {
    if (c.n < 1) throw ConfigError("config field 'grid': n must be >= 1");
    if (!(c.p > 0.0 && c.p <= 1.0)) {
      throw ConfigError("config field 'grid': p must be in (0, 1], got " +
                        format_number(c.p));
    }
    if (total_local_iterations > 0 && c.n > total_local_iterations) {
      throw ConfigError("config field 'rounds.total_local_iterations': " +
                        std::to_string(total_local_iterations) +
                        " is smaller than n = " + std::to_string(c.n));
    }
  }
  if (!(data.validation_fraction >= 0.0 && data.validation_fraction < 1.0)) {
    throw ConfigError("config field 'dataset.validation_fraction': must be in [0, 1)");
  }
  if (parallel_cells == 0) throw ConfigError("config field 'parallel_cells': must be >= 1");
  SparsityConfig probe = compression.sparsity;
  probe.p = 1.0;
  try {
    probe.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config field 'compression': ") + e.what());
  }
}

ExperimentSpec parse_experiment(const json& config) {
  ExperimentSpec spec;
  Section root(config, "");
  spec.seed = root.get<std::uint64_t>("seed", 0);
  spec.output_dir = root.get<std::string>("output_dir", "out");
  spec.eval_every = root.get<std::size_t>("eval_every", 0);
  spec.parallel_cells = root.get<std::size_t>("parallel_cells", 1);
  spec.parallel_clients = root.get<bool>("parallel_clients", false);

  if (root.has("dataset")) {
    Section d = root.child("dataset");
    auto& s = spec.data.synthetic;
    if (d.has("images") || d.has("labels")) {
      spec.data.idx_images = d.get<std::string>("images", "");
      spec.data.idx_labels = d.get<std::string>("labels", "");
      if (spec.data.idx_images->empty() || spec.data.idx_labels->empty()) {
        d.fail("images", "IDX data needs both 'images' and 'labels'");
      }
    }
    if (d.has("kind")) s.kind = dataset_kind(d, d.get<std::string>("kind", ""));
    s.size = d.get<std::size_t>("size", s.size);
    s.seed = d.get<std::uint64_t>("seed", s.seed);
    s.dim = d.get<std::size_t>("dim", s.dim);
    s.separation = d.get<double>("separation", s.separation);
    s.noise = d.get<double>("noise", s.noise);
    s.outputs = d.get<std::size_t>("outputs", s.outputs);
    spec.data.validation_fraction =
        d.get<double>("validation_fraction", spec.data.validation_fraction);
    if (s.size == 0) d.fail("size", "must be positive");
    if (s.dim == 0) d.fail("dim", "must be positive");
    d.finish();
  }

  if (root.has("model")) {
    Section m = root.child("model");
    if (m.has("kind")) spec.model.kind = model_kind(m, m.get<std::string>("kind", ""));
    spec.model.hidden = m.get<std::size_t>("hidden", spec.model.hidden);
    if (m.has("outputs")) spec.model_outputs = m.get<std::size_t>("outputs", 1);
    if (spec.model.kind == ModelKind::kMlp && spec.model.hidden == 0) {
      m.fail("hidden", "mlp needs a positive hidden width");
    }
    m.finish();
  }

  if (root.has("optimizer")) {
    Section o = root.child("optimizer");
    auto& c = spec.optimizer;
    if (o.has("kind")) c.kind = optimizer_kind(o, o.get<std::string>("kind", ""));
    c.learning_rate = o.get<double>("learning_rate", c.learning_rate);
    c.momentum = o.get<double>("momentum", c.momentum);
    c.beta1 = o.get<double>("beta1", c.beta1);
    c.beta2 = o.get<double>("beta2", c.beta2);
    c.epsilon = o.get<double>("epsilon", c.epsilon);
    if (c.learning_rate < 0.0) o.fail("learning_rate", "must be non-negative");
    if (o.has("schedule")) {
      const json& sched = o.raw("schedule");
      if (!sched.is_array()) o.fail("schedule", "expected an array");
      for (std::size_t i = 0; i < sched.size(); ++i) {
        Section e(sched[i], o.name("schedule[" + std::to_string(i) + "]"));
        LrDecay d;
        d.factor = e.get<double>("factor", d.factor);
        d.at_step = e.get<std::uint64_t>("at", 0);
        e.finish();
        c.schedule.push_back(d);
      }
    }
    o.finish();
  }

  if (root.has("rounds")) {
    Section r = root.child("rounds");
    auto& c = spec.rounds;
    c.clients = r.get<std::size_t>("clients", c.clients);
    c.participation = r.get<double>("participation", c.participation);
    c.batch_size = r.get<std::size_t>("batch_size", c.batch_size);
    spec.total_local_iterations =
        r.get<std::uint64_t>("total_local_iterations", spec.total_local_iterations);
    if (c.clients == 0) r.fail("clients", "must be >= 1");
    if (!(c.participation > 0.0 && c.participation <= 1.0)) {
      r.fail("participation", "must be in (0, 1]");
    }
    if (c.batch_size == 0) r.fail("batch_size", "must be >= 1");
    if (spec.total_local_iterations == 0) {
      r.fail("total_local_iterations", "must be >= 1");
    }
    r.finish();
  }

  if (root.has("compression")) {
    Section c = root.child("compression");
    auto& s = spec.compression;
    if (c.has("mode")) s.mode = compression_mode(c, c.get<std::string>("mode", ""));
    s.sparsity.subsample_fraction =
        c.get<double>("subsample_fraction", s.sparsity.subsample_fraction);
    s.sparsity.min_k = c.get<std::size_t>("min_k", s.sparsity.min_k);
    s.momentum_masking = c.get<bool>("momentum_masking", s.momentum_masking);
    if (!(s.sparsity.subsample_fraction > 0.0 && s.sparsity.subsample_fraction <= 1.0)) {
      c.fail("subsample_fraction", "must be in (0, 1]");
    }
    c.finish();
  }

  if (root.has("grid")) {
    Section g = root.child("grid");
    if (g.has("cells")) {
      const json& cells = g.raw("cells");
      if (!cells.is_array() || cells.empty()) g.fail("cells", "expected a non-empty array");
      for (const auto& c : cells) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() ||
            !c[1].is_number() || c[0].get<long long>() < 1) {
          g.fail("cells", "each cell is [n, p] with integer n >= 1");
        }
        spec.cells.push_back({c[0].get<std::size_t>(), c[1].get<double>()});
      }
      axes_from_cells(spec);
    } else {
      spec.grid_n = g.has("n") ? number_list<std::size_t>(g, "n")
                               : std::vector<std::size_t>{1};
      spec.grid_p = g.has("p") ? number_list<double>(g, "p")
                               : std::vector<double>{1.0};
      for (auto n : spec.grid_n) {
        for (auto p : spec.grid_p) spec.cells.push_back({n, p});
      }
    }
    g.finish();
  } else {
    spec.grid_n = {1};
    spec.grid_p = {1.0};
    spec.cells = {{1, 1.0}};
  }

  root.finish();
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

std::vector<GridCell> parse_grid_flag(const std::string& flag) {
  std::vector<GridCell> cells;
  std::stringstream ss(flag);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) {
      throw ConfigError("--grid: expected NxP, got '" + item + "'");
    }
    GridCell c;
    try {
      std::size_t used = 0;
      const long long n = std::stoll(item.substr(0, x), &used);
      if (used != x || n < 1) throw std::invalid_argument("n");
      c.n = static_cast<std::size_t>(n);
      const std::string ps = item.substr(x + 1);
      c.p = std::stod(ps, &used);
      if (used != ps.size()) throw std::invalid_argument("p");
    } catch (const std::exception&) {
      throw ConfigError("--grid: cannot parse '" + item + "'");
    }
    if (!(c.p > 0.0 && c.p <= 1.0)) {
      throw ConfigError("--grid: p must be in (0, 1] in '" + item + "'");
    }
    cells.push_back(c);
  }
  if (cells.empty()) throw ConfigError("--grid: empty cell list");
  return cells;
}

void apply_grid_flag(ExperimentSpec& spec, const std::string& flag) {
  spec.cells = parse_grid_flag(flag);
  axes_from_cells(spec);
  spec.validate();
}

std::string cell_file_name(const GridCell& cell) {
  return "cell_n" + std::to_string(cell.n) + "_p" + format_number(cell.p) +
         ".ndjson";
}

std::pair<Dataset, Dataset> build_datasets(const DataConfig& data) {
  Dataset all = data.idx_images ? load_idx(*data.idx_images, *data.idx_labels)
                                : make_dataset(data.synthetic);
  return split_holdout(all, data.validation_fraction);
}

RunConfig cell_run_config(const ExperimentSpec& spec, const Dataset& train,
                          const GridCell& cell) {
  RunConfig rc;
  rc.model = spec.model;
  rc.model.input_dim = train.cols;
  if (train.task == TaskKind::kRegression) {
    rc.model.output_dim = train.target_dim;
  } else {
    rc.model.output_dim = spec.model_outputs.value_or(train.num_classes);
  }
  rc.optimizer = spec.optimizer;
  rc.rounds = spec.rounds;
  rc.rounds.local_iterations = cell.n;
  rc.rounds.rounds = static_cast<std::size_t>(spec.total_local_iterations / cell.n);
  rc.compression = spec.compression;
  rc.compression.sparsity.p = cell.p;
  // Full gradient density means no gradient compression at all.
  if (cell.p >= 1.0) rc.compression.mode = CompressionMode::kIdentity;
  rc.seed = spec.seed;
  rc.eval_every = spec.eval_every;
  rc.parallel_clients = spec.parallel_clients;
  return rc;
}

std::optional<double> final_error(const MetricsLog& log) {
  if (log.summary.final_validation_accuracy) {
    return 1.0 - *log.summary.final_validation_accuracy;
  }
  if (log.summary.final_validation_loss) return log.summary.final_validation_loss;
  if (log.summary.final_train_accuracy) return 1.0 - *log.summary.final_train_accuracy;
  return log.summary.final_train_loss;
}

namespace {

json opt(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const RoundRecord& r) {
  return json{{"type", "round"},
              {"round", r.round},
              {"local_iterations", r.local_iterations},
              {"client_loss", r.client_loss},
              {"train_loss", opt(r.train_loss)},
              {"train_accuracy", opt(r.train_accuracy)},
              {"validation_loss", opt(r.validation_loss)},
              {"validation_accuracy", opt(r.validation_accuracy)},
              {"participants", r.participants},
              {"uplink_bits", r.uplink_bits},
              {"nonzeros", r.nonzeros},
              {"round_bits", r.round_bits},
              {"cumulative_bits", r.cumulative_bits},
              {"theoretical_bits", r.theoretical_bits},
              {"cumulative_theoretical_bits", r.cumulative_theoretical_bits},
              {"baseline_bits", r.baseline_bits},
              {"compression_ratio", r.compression_ratio}};
}

json to_json(const RunSummary& s) {
  json j{{"type", "summary"},
         {"rounds_completed", s.rounds_completed},
         {"local_iterations", s.local_iterations},
         {"total_bits", s.total_bits},
         {"total_theoretical_bits", s.total_theoretical_bits},
         {"baseline_bits", s.baseline_bits},
         {"compression_ratio", s.compression_ratio},
         {"dense_message_bits", s.dense_message_bits},
         {"final_train_loss", opt(s.final_train_loss)},
         {"final_train_accuracy", opt(s.final_train_accuracy)},
         {"final_validation_loss", opt(s.final_validation_loss)},
         {"final_validation_accuracy", opt(s.final_validation_accuracy)}};
  j["error"] = s.error ? json(*s.error) : json(nullptr);
  return j;
}

void write_metrics(const std::filesystem::path& path, const MetricsLog& log,
                   const GridCell& cell) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : log.rounds) out << to_json(r).dump() << '\n';
  json s = to_json(log.summary);
  s["n"] = cell.n;
  s["p"] = cell.p;
  out << s.dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_grid_summary(const std::filesystem::path& path,
                        const GridSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "temporal\\gradient";
  for (double p : summary.gradient) out << ',' << format_number(p);
  out << '\n';
  for (std::size_t r = 0; r < summary.temporal.size(); ++r) {
    out << format_number(summary.temporal[r]);
    for (const auto& e : summary.error[r]) {
      out << ',';
      if (e) out << format_number(*e);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

GridSummary read_grid_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
  };
  auto number = [&path](const std::string& s, std::size_t line) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad number '" + s + "' on line " +
                           std::to_string(line),
                       0);
    }
  };

  GridSummary g;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 0);
  const auto header = split(line);
  for (std::size_t i = 1; i < header.size(); ++i) g.gradient.push_back(number(header[i], 1));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                           " has " + std::to_string(fields.size()) + " fields",
                       0);
    }
    g.temporal.push_back(number(fields[0], lineno));
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        row.emplace_back();
      } else {
        row.emplace_back(number(fields[i], lineno));
      }
    }
    g.error.push_back(std::move(row));
  }
  return g;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  std::filesystem::create_directories(spec.output_dir);
  const auto [train, validation] = build_datasets(spec.data);

  ExperimentResult result;
  result.runs.resize(spec.cells.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> ok{true};

  auto worker = [&]() {
    for (std::size_t i = next++; i < spec.cells.size(); i = next++) {
      const GridCell& cell = spec.cells[i];
      const RunConfig rc = cell_run_config(spec, train, cell);
      MetricsLog m = run(rc, train, validation);
      write_metrics(spec.output_dir / cell_file_name(cell), m, cell);
      std::lock_guard<std::mutex> lock(log_mutex);
      if (m.summary.error) {
        ok = false;
        log << "cell n=" << cell.n << " p=" << format_number(cell.p)
            << " failed: " << *m.summary.error << '\n';
      } else {
        const auto err = final_error(m);
        log << "cell n=" << cell.n << " p=" << format_number(cell.p)
            << " rounds=" << m.summary.rounds_completed
            << " error=" << (err ? format_number(*err) : "n/a")
            << " bits=" << m.summary.total_bits
            << " ratio=" << format_number(m.summary.compression_ratio) << '\n';
      }
      result.runs[i] = {cell, std::move(m)};
    }
  };
  const std::size_t threads = std::min(spec.parallel_cells, spec.cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.ok = ok;

  GridSummary& g = result.summary;
  for (auto n : spec.grid_n) g.temporal.push_back(1.0 / static_cast<double>(n));
  g.gradient = spec.grid_p;
  g.error.assign(spec.grid_n.size(),
                 std::vector<std::optional<double>>(spec.grid_p.size()));
  for (const auto& [cell, m] : result.runs) {
    const auto r = std::find(spec.grid_n.begin(), spec.grid_n.end(), cell.n) - spec.grid_n.begin();
    const auto c = std::find(spec.grid_p.begin(), spec.grid_p.end(), cell.p) - spec.grid_p.begin();
    g.error[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = final_error(m);
  }
  write_grid_summary(spec.output_dir / "grid_summary.csv", g);
  return result;
}

DiagonalReport diagonal_report(const GridSummary& summary) {
  struct Acc {
    double total;
    std::vector<double> values;
  };
  std::map<long long, Acc> by_total;
  std::map<std::size_t, std::vector<double>> by_row, by_col;
  for (std::size_t r = 0; r < summary.error.size(); ++r) {
    for (std::size_t c = 0; c < summary.error[r].size(); ++c) {
      const auto& e = summary.error[r][c];
      if (!e) continue;
      const double total = summary.temporal[r] * summary.gradient[c];
      const auto key = std::llround(std::log10(total) * 1e6);
      auto& acc = by_total[key];
      acc.total = total;
      acc.values.push_back(*e);
      by_row[r].push_back(*e);
      by_col[c].push_back(*e);
    }
  }

  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  auto mean_multi_spread = [&](const auto& groups) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [_, v] : groups) {
      const std::vector<double>& values = v;
      if (values.size() < 2) continue;
      sum += spread(values);
      ++count;
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  };

  DiagonalReport rep;
  std::map<long long, std::vector<double>> total_values;
  for (auto it = by_total.rbegin(); it != by_total.rend(); ++it) {
    const auto& acc = it->second;
    SparsityGroup g;
    g.total_sparsity = acc.total;
    g.cells = acc.values.size();
    double sum = 0.0;
    for (double v : acc.values) sum += v;
    g.mean = sum / static_cast<double>(acc.values.size());
    g.spread = spread(acc.values);
    rep.groups.push_back(g);
    total_values[it->first] = acc.values;
  }
  rep.mean_within_spread = mean_multi_spread(total_values);
  if (!rep.groups.empty()) {
    const auto [lo, hi] = std::minmax_element(
        rep.groups.begin(), rep.groups.end(),
        [](const SparsityGroup& a, const SparsityGroup& b) { return a.mean < b.mean; });
    rep.across_range = hi->mean - lo->mean;
  }
  rep.temporal_axis_spread = mean_multi_spread(by_row);
  rep.gradient_axis_spread = mean_multi_spread(by_col);
  return rep;
}

void print_diagonal_report(const DiagonalReport& report, std::ostream& out) {
  char line[160];
  out << "total_sparsity,cells,mean_error,spread\n";
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof line, "%.6g,%zu,%.6f,%.6f\n", g.total_sparsity,
                  g.cells, g.mean, g.spread);
    out << line;
  }
  std::snprintf(line, sizeof line,
                "# mean spread within equal total sparsity: %.6f\n"
                "# range of means across total sparsity:    %.6f\n",
                report.mean_within_spread, report.across_range);
  out << line;
  std::snprintf(line, sizeof line,
                "# mean spread within equal temporal sparsity: %.6f\n"
                "# mean spread within equal gradient sparsity: %.6f\n",
                report.temporal_axis_spread, report.gradient_axis_spread);
  out << line;
  out << "# total sparsity predicts error: "
      << (report.total_sparsity_predicts() ? "yes" : "no") << '\n';
}

std::vector<Table1Row> default_table1_rows() {
  return {
      {"Baseline", 1.0, 1.0, 32.0, 0.0},
      {"Gradient Dropping", 1.0, 0.001, 32.0, 16.0},
      {"Federated Averaging", 0.01, 1.0, 32.0, 0.0},
      {"Sparse Binary Compression", 0.01, 0.01, 0.0, std::nullopt},
  };
}

std::vector<Table1Row> parse_table1(const json& config) {
  if (!config.contains("table1")) return default_table1_rows();
  const json& rows = config.at("table1");
  if (!rows.is_array() || rows.empty()) {
    throw ConfigError("config field 'table1': expected a non-empty array");
  }
  std::vector<Table1Row> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Section s(rows[i], "table1[" + std::to_string(i) + "]");
    Table1Row r;
    r.name = s.get<std::string>("name", "row " + std::to_string(i));
    r.temporal_sparsity = s.get<double>("temporal_sparsity", 1.0);
    r.gradient_sparsity = s.get<double>("gradient_sparsity", 1.0);
    r.value_bits = s.get<double>("value_bits", 32.0);
    if (s.has("position_bits") && s.raw("position_bits").is_string()) {
      if (s.raw("position_bits").get<std::string>() != "golomb") {
        s.fail("position_bits", "expected a number or \"golomb\"");
      }
      r.position_bits = std::nullopt;
    } else {
      r.position_bits = s.get<double>("position_bits", 0.0);
    }
    if (!(r.temporal_sparsity > 0.0 && r.temporal_sparsity <= 1.0)) {
      s.fail("temporal_sparsity", "must be in (0, 1]");
    }
    if (!(r.gradient_sparsity > 0.0 && r.gradient_sparsity <= 1.0)) {
      s.fail("gradient_sparsity", "must be in (0, 1]");
    }
    s.finish();
    out.push_back(r);
  }
  return out;
}

std::vector<Table1Result> table1_report(const std::vector<Table1Row>& rows) {
  const double dense = total_bits_model(1, 1, 1, 0, 32, 1);
  std::vector<Table1Result> out;
  for (const auto& row : rows) {
    Table1Result r;
    r.row = row;
    r.position_bits = row.position_bits.value_or(
        position_bits_model(row.gradient_sparsity));
    r.bits_per_parameter = total_bits_model(1, row.temporal_sparsity,
                                            row.gradient_sparsity,
                                            r.position_bits, row.value_bits, 1);
    r.compression_rate = dense / r.bits_per_parameter;
    out.push_back(r);
  }
  return out;
}

void print_table1(const std::vector<Table1Result>& results, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %10s %10s %6s %9s %12s\n", "method",
                "temporal", "gradient", "value", "position", "compression");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-28s %9.4g%% %9.4g%% %6.4g %9.4g %11s%.0f\n",
                  r.row.name.c_str(), 100.0 * r.row.temporal_sparsity,
                  100.0 * r.row.gradient_sparsity, r.row.value_bits,
                  r.position_bits, "x", std::floor(r.compression_rate));
    out << line;
  }
}

}  // namespace sbc
