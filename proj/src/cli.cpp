// SPDX-License-Identifier: Apache-2.0
#include "irnn/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"

#include "irnn/datapipe.hpp"
#include "irnn/errors.hpp"
#include "irnn/explain.hpp"
#include "irnn/kvconfig.hpp"
#include "irnn/metrics.hpp"
#include "irnn/model.hpp"
#include "irnn/parallel.hpp"
#include "irnn/physionet.hpp"
#include "irnn/serialize.hpp"
#include "irnn/synthgen.hpp"
#include "irnn/train.hpp"

namespace irnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kManifestSchemaVersion = 1;
constexpr int kSplitSchemaVersion = 1;
constexpr int kSummarySchemaVersion = 1;
constexpr std::uint64_t kHoldOutStream = 10;
constexpr std::uint64_t kSplitStreamBase = 100;
constexpr std::uint64_t kRunStreamBase = 200;

// --------------------------------------------------------------- hashing

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// -------------------------------------------------------------- protocol

Partition hold_out(std::span<const int> labels, std::uint64_t master_seed) {
  const double fr[] = {1.0 - kTestFraction, kTestFraction};
  auto parts = data::split(labels, fr, derive_seed(master_seed, kHoldOutStream));
  return {std::move(parts[0]), std::move(parts[1])};
}

Partition seed_split(std::span<const int> dev_labels, std::uint64_t master_seed,
                     std::size_t k) {
  const double fr[] = {1.0 - kValidationFraction, kValidationFraction};
  auto parts = data::split(dev_labels, fr, derive_seed(master_seed, kSplitStreamBase + k));
  return {std::move(parts[0]), std::move(parts[1])};
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t k) {
  return derive_seed(master_seed, kRunStreamBase + k);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractError*>(&e)) {
    return kExitUsage;
  }
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const NumericError*>(&e)) {
    return kExitNumeric;
  }
  return kExitInternal;
}

namespace {

// -------------------------------------------------------------- manifest

class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_(std::move(out_dir)) {}

  void config(const std::string& canonical) { config_hash_ = sha256_hex(canonical); }
  void seed(std::uint64_t master) { master_ = master; }
  void seeds(std::vector<std::uint64_t> s) { seeds_ = std::move(s); }
  void model(std::string m) { model_ = std::move(m); }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void artifact(const std::string& relative) { artifacts_.insert(relative); }

  void write() const {
    json inputs = json::object();
    for (const auto& p : inputs_) {
      inputs[p.generic_string()] = fs::is_regular_file(p) ? sha256_file(p) : "";
    }
    json artifacts = json::object();
    for (const auto& a : artifacts_) {
      artifacts[a] = sha256_file(out_ / a);
    }
    json doc = {{"schema_version", kManifestSchemaVersion},
                {"command", command_},
                {"config_hash", config_hash_},
                {"master_seed", master_},
                {"seeds", seeds_},
                {"inputs", inputs},
                {"output_dir", out_.generic_string()},
                {"artifacts", artifacts}};
    if (!model_.empty()) doc["model"] = model_;
    io::write_json(out_ / "manifest.json", doc);
  }

 private:
  std::string command_;
  fs::path out_;
  std::string config_hash_ = sha256_hex("");
  std::uint64_t master_ = 0;
  std::vector<std::uint64_t> seeds_;
  std::string model_;
  std::vector<fs::path> inputs_;
  std::set<std::string> artifacts_;
};

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) {
    throw DataError("missing file: " + p.string());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) {
    throw DataError("cannot write " + p.string());
  }
  out << text;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) {
    throw DataError("cannot open " + p.string());
  }
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// ------------------------------------------------------------- prepared

struct Prepared {
  fs::path dir;
  std::vector<std::string> features;
  std::size_t max_len = data::kDefaultMaxLen;
  std::uint64_t seed = 0;
  data::NormStats stats;
  std::vector<data::TimeSeriesSample> dev, test;
};

std::vector<std::string> ids_from(const json& doc, const char* key) {
  try {
    return doc.at(key).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("split file field '") + key + "': " + e.what());
  }
}

std::vector<data::TimeSeriesSample> build_ids(
    const std::unordered_map<std::string, const data::EventGroup*>& by_id,
    const std::unordered_map<std::string, int>& labels, const std::vector<std::string>& ids,
    const data::NormStats& stats, std::size_t max_len) {
  std::vector<data::TimeSeriesSample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto g = by_id.find(id);
    const auto l = labels.find(id);
    if (g == by_id.end() || l == labels.end()) {
      throw DataError("prepared split names unknown sample '" + id + "'");
    }
    out.push_back(data::build_sample(g->second->events, stats, l->second, max_len, id));
  }
  return out;
}

Prepared load_prepared(const fs::path& dir, std::size_t max_len_override) {
  Prepared p;
  p.dir = dir;
  for (const char* f : {"events.csv", "labels.csv", "norm_stats.json", "split.json"}) {
    require_file(dir / f);
  }
  const json split = io::read_json(dir / "split.json");
  p.features = ids_from(split, "features");
  try {
    p.max_len = split.at("max_len").get<std::size_t>();
    p.seed = split.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split.json: ") + e.what());
  }
  if (max_len_override > 0) p.max_len = max_len_override;
  p.stats = io::norm_stats_from_json(io::read_json(dir / "norm_stats.json"));
  const auto events = data::load_long_csv(dir / "events.csv", p.features);
  const auto labels = data::load_labels_csv(dir / "labels.csv");
  std::unordered_map<std::string, const data::EventGroup*> by_id;
  for (const auto& g : events.samples) by_id[g.sample_id] = &g;
  p.dev = build_ids(by_id, labels, ids_from(split, "dev"), p.stats, p.max_len);
  p.test = build_ids(by_id, labels, ids_from(split, "test"), p.stats, p.max_len);
  return p;
}

std::vector<int> labels_of(const data::SampleRefs& refs) {
  std::vector<int> y;
  for (const auto* s : refs) y.push_back(s->label);
  return y;
}

std::vector<int> labels_of(const std::vector<data::TimeSeriesSample>& v) {
  std::vector<int> y;
  for (const auto& s : v) y.push_back(s.label);
  return y;
}

std::vector<std::string> ids_of(const data::SampleRefs& refs) {
  std::vector<std::string> out;
  for (const auto* s : refs) out.push_back(s->sample_id);
  return out;
}

data::SampleRefs refs_by_id(const std::vector<data::TimeSeriesSample>& pool,
                            const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const data::TimeSeriesSample*> by_id;
  for (const auto& s : pool) by_id[s.sample_id] = &s;
  data::SampleRefs out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("sample '" + id + "' is not in the prepared dev pool");
    }
    out.push_back(it->second);
  }
  return out;
}

// --------------------------------------------------------------- options

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t jobs = 1;
  std::string out;
  std::size_t max_len = 0;
};

config::KeyValues load_config(const std::string& path) {
  return path.empty() ? config::KeyValues{} : config::KeyValues::load(path);
}

// ----------------------------------------------------------------- synth

int cmd_synth(const Common& o) {
  config::KeyValues kv = load_config(o.config);
  if (o.seed_given) kv.set("seed", std::to_string(o.seed));
  const synth::GeneratorConfig cfg = synth::config_from(kv);
  const fs::path out = o.out;
  const auto ds = synth::generate(cfg, o.jobs);
  synth::write_dataset(out, ds);
  std::string names;
  for (const auto& n : cfg.names()) names += n + "\n";
  write_text(out / "features.txt", names);

  Manifest m("synth", out);
  m.config(kv.canonical());
  m.seed(cfg.seed);
  if (!o.config.empty()) m.input(o.config);
  for (const char* a : {"events.csv", "labels.csv", "truth.json", "features.txt"}) m.artifact(a);
  m.write();
  const auto pos = std::count(ds.labels.begin(), ds.labels.end(), 1);
  std::cout << "wrote " << ds.samples.size() << " samples (" << pos << " positive) to "
            << out.string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- prepare

struct PrepareOptions {
  std::string data;
  std::string physionet;
  std::string outcomes;
  std::vector<std::string> features;
};

int cmd_prepare(const Common& o, const PrepareOptions& p) {
  if (p.data.empty() == p.physionet.empty()) {
    throw ConfigError("prepare needs exactly one of --data or --physionet");
  }
  const fs::path out = o.out;
  Manifest m("prepare", out);

  std::vector<data::EventGroup> groups;
  std::unordered_map<std::string, int> labels;
  std::vector<std::string> features = p.features;
  if (!p.physionet.empty()) {
    if (p.outcomes.empty()) throw ConfigError("--physionet requires --outcomes");
    const auto table = data::default_plausibility_table();
    auto records = data::load_physionet_directory(p.physionet, table);
    labels = data::load_physionet_outcomes(p.outcomes);
    std::map<std::string, std::size_t> dropped;
    for (auto& r : records) {
      for (const auto& [k, v] : r.dropped) dropped[k] += v;
      groups.push_back({r.record_id, std::move(r.events)});
    }
    for (const auto& [k, v] : dropped) {
      std::cerr << "note: dropped " << v << " implausible " << k << " values\n";
    }
    if (features.empty()) features = data::physionet_features();
    m.input(p.physionet);
    m.input(p.outcomes);
  } else {
    const fs::path dir = p.data;
    require_file(dir / "events.csv");
    require_file(dir / "labels.csv");
    if (features.empty() && fs::is_regular_file(dir / "features.txt")) {
      features = read_lines(dir / "features.txt");
      m.input(dir / "features.txt");
    }
    auto events = data::load_long_csv(dir / "events.csv", features);
    labels = data::load_labels_csv(dir / "labels.csv");
    if (features.empty()) {
      std::set<std::string> names;
      for (const auto& g : events.samples) {
        for (const auto& e : g.events) names.insert(e.variable);
      }
      features.assign(names.begin(), names.end());
    }
    for (const auto& [k, v] : events.unknown_variables) {
      std::cerr << "note: ignoring " << v << " rows of unknown variable " << k << "\n";
    }
    groups = std::move(events.samples);
    m.input(dir / "events.csv");
    m.input(dir / "labels.csv");
  }

  // Labeled samples only; the hold-out is stratified on their labels.
  std::vector<data::EventGroup> kept;
  std::vector<int> y;
  std::size_t unlabeled = 0;
  for (auto& g : groups) {
    const auto it = labels.find(g.sample_id);
    if (it == labels.end()) {
      ++unlabeled;
      continue;
    }
    y.push_back(it->second);
    kept.push_back(std::move(g));
  }
  if (unlabeled > 0) {
    std::cerr << "note: " << unlabeled << " samples have no label and were skipped\n";
  }
  if (kept.empty()) throw DataError("no labeled samples");

  const Partition part = hold_out(y, o.seed);
  std::vector<data::EventGroup> dev;
  for (auto i : part.first) dev.push_back(kept[i]);
  const data::NormStats stats = data::fit_norm_stats(dev, features);

  fs::create_directories(out);
  data::write_long_csv(out / "events.csv", kept);
  std::vector<std::string> ids;
  for (const auto& g : kept) ids.push_back(g.sample_id);
  data::write_labels_csv(out / "labels.csv", ids, y);
  io::write_json(out / "norm_stats.json", io::norm_stats_to_json(stats));
  std::vector<std::string> dev_ids, test_ids;
  for (auto i : part.first) dev_ids.push_back(ids[i]);
  for (auto i : part.second) test_ids.push_back(ids[i]);
  const std::size_t max_len = o.max_len > 0 ? o.max_len : data::kDefaultMaxLen;
  io::write_json(out / "split.json", {{"schema_version", kSplitSchemaVersion},
                                      {"seed", o.seed},
                                      {"test_fraction", kTestFraction},
                                      {"max_len", max_len},
                                      {"features", features},
                                      {"dev", dev_ids},
                                      {"test", test_ids}});
  m.config("max_len=" + std::to_string(max_len) + "\n");
  m.seed(o.seed);
  for (const char* a : {"events.csv", "labels.csv", "norm_stats.json", "split.json"}) {
    m.artifact(a);
  }
  m.write();
  std::cout << "prepared " << kept.size() << " samples: " << dev_ids.size() << " dev, "
            << test_ids.size() << " test, " << features.size() << " features\n";
  return kExitOk;
}

// ----------------------------------------------------------------- train

const std::set<std::string> kTrainKeys = {
    "learning_rate", "clip_norm", "batch_size", "max_epochs", "patience", "beta1",
    "beta2", "eps", "seed", "grid_learning_rates", "grid_clip_norms", "mu_diagonal",
    "mu_static", "gamma_diagonal"};

model::IrnnConfig irnn_config_from(const config::KeyValues& kv) {
  model::IrnnConfig c;
  c.mu_diagonal = kv.get_bool("mu_diagonal", c.mu_diagonal);
  c.mu_static = kv.get_bool("mu_static", c.mu_static);
  c.gamma_diagonal = kv.get_bool("gamma_diagonal", c.gamma_diagonal);
  return c;
}

struct Aggregate {
  std::vector<double> auc, ppv, spec;
  void add(const metrics::EvalReport& r) {
    auc.push_back(r.auc);
    ppv.push_back(r.ppv);
    spec.push_back(r.specificity);
  }
  std::string csv_row(const std::string& label) const {
    return label + ",\"" + metrics::format_mean_std(auc) + "\",\"" +
           metrics::format_mean_std(ppv) + "\",\"" + metrics::format_mean_std(spec) + "\"," +
           std::to_string(auc.size()) + "\n";
  }
};

constexpr const char* kComparisonHeader = "model,auc,ppv,specificity,runs\n";

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct TrainOptions {
  std::string data;
  std::string model;
  std::size_t seeds = kDefaultSeeds;
};

int cmd_train(const Common& o, const TrainOptions& t) {
  const model::ModelKind kind = model::parse_model_kind(t.model);
  if (t.seeds == 0) throw ConfigError("--seeds must be positive");
  config::KeyValues kv = load_config(o.config);
  kv.require_known(kTrainKeys);
  if (o.seed_given) kv.set("seed", std::to_string(o.seed));
  const train::TrainConfig base = train::train_config_from(kv);
  const std::uint64_t master = base.seed;
  const bool grid = kv.has("grid_learning_rates") || kv.has("grid_clip_norms");
  const auto lrs = kv.get_doubles("grid_learning_rates", {base.learning_rate});
  const auto clips = kv.get_doubles("grid_clip_norms", {base.clip_norm});

  const Prepared prep = load_prepared(t.data, o.max_len);
  const train::ModelSpec spec{kind, prep.features.size(), irnn_config_from(kv)};
  const std::vector<int> dev_y = labels_of(prep.dev);
  const data::SampleRefs test = data::all_of(prep.test);
  const std::vector<int> test_y = labels_of(test);
  const fs::path out = o.out;
  fs::create_directories(out);

  struct RunOut {
    train::TrainResult result;
    train::TrainConfig config;
    std::vector<train::GridCell> cells;
    metrics::EvalReport report;
    std::vector<std::string> train_ids, val_ids;
  };
  std::vector<RunOut> runs(t.seeds);
  // Grid cells fan out inside a run when there is a single run.
  const std::size_t inner_jobs = t.seeds == 1 ? o.jobs : 1;
  parallel_for(t.seeds, o.jobs, [&](std::size_t k) {
    const Partition part = seed_split(dev_y, master, k);
    const data::SampleRefs tr = data::select(prep.dev, part.first);
    const data::SampleRefs va = data::select(prep.dev, part.second);
    train::TrainConfig cfg = base;
    cfg.seed = run_seed(master, k);
    RunOut& r = runs[k];
    if (grid) {
      auto g = train::grid_search(spec, tr, va, cfg, lrs, clips, inner_jobs);
      r.result = std::move(g.best);
      r.config = g.best_config;
      r.cells = std::move(g.cells);
    } else {
      r.result = train::train_model(spec, tr, va, cfg);
      r.config = cfg;
    }
    r.report = metrics::evaluate(model::predict_logits(r.result.model, test), test_y);
    r.train_ids = ids_of(tr);
    r.val_ids = ids_of(va);
  });

  Manifest m("train", out);
  m.config(kv.canonical() + "model=" + t.model + "\nseeds=" + std::to_string(t.seeds) +
           "\nmax_len=" + std::to_string(prep.max_len) + "\n");
  m.seed(master);
  m.model(t.model);
  for (const char* f : {"events.csv", "labels.csv", "norm_stats.json", "split.json"}) {
    m.input(prep.dir / f);
  }
  if (!o.config.empty()) m.input(o.config);

  Aggregate agg;
  json seeds = json::array();
  std::vector<std::uint64_t> run_seeds;
  for (std::size_t k = 0; k < t.seeds; ++k) {
    const RunOut& r = runs[k];
    const std::string dir = "seed_" + std::to_string(k);
    fs::create_directories(out / dir);
    io::save_model(out / dir / "model.json", r.result.model);
    train::write_history_csv(out / dir / "history.csv", r.result.history);
    io::write_json(out / dir / "split.json", {{"schema_version", kSplitSchemaVersion},
                                              {"run", k},
                                              {"train", r.train_ids},
                                              {"val", r.val_ids}});
    io::write_json(out / dir / "eval_test.json", metrics::to_json(r.report));
    for (const char* f : {"model.json", "history.csv", "split.json", "eval_test.json"}) {
      m.artifact(dir + "/" + f);
    }
    if (grid) {
      std::ostringstream g;
      g << "learning_rate,clip_norm,best_val_auc,best_epoch\n";
      for (const auto& c : r.cells) {
        g << c.learning_rate << ',' << c.clip_norm << ',' << c.best_val_auc << ','
          << c.history.best_epoch << '\n';
      }
      write_text(out / dir / "grid.csv", g.str());
      m.artifact(dir + "/grid.csv");
    }
    agg.add(r.report);
    run_seeds.push_back(r.config.seed);
    seeds.push_back({{"run", k},
                     {"seed", r.config.seed},
                     {"learning_rate", r.config.learning_rate},
                     {"clip_norm", r.config.clip_norm},
                     {"best_epoch", r.result.history.best_epoch},
                     {"best_val_auc", r.result.history.best_val_auc},
                     {"test", metrics::to_json(r.report)}});
    std::cout << t.model << " run " << k << ": best epoch " << r.result.history.best_epoch
              << ", val AUC " << std::fixed << std::setprecision(4)
              << r.result.history.best_val_auc << ", test AUC " << r.report.auc << "\n";
  }
  m.seeds(run_seeds);

  auto stat = [](const std::vector<double>& v) {
    return json{{"mean", mean_of(v)}, {"std", std_of(v)}};
  };
  io::write_json(out / "summary.json", {{"schema_version", kSummarySchemaVersion},
                                        {"model", t.model},
                                        {"master_seed", master},
                                        {"runs", seeds},
                                        {"auc", stat(agg.auc)},
                                        {"ppv", stat(agg.ppv)},
                                        {"specificity", stat(agg.spec)}});
  write_text(out / "summary.csv", std::string(kComparisonHeader) + agg.csv_row(t.model));
  m.artifact("summary.json");
  m.artifact("summary.csv");
  m.write();
  std::cout << kComparisonHeader << agg.csv_row(t.model);
  return kExitOk;
}

// -------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string weights;
  std::string data;
  std::string split = "test";
};

data::SampleRefs split_refs(const Prepared& prep, const std::string& split,
                            const fs::path& run_dir) {
  if (split == "test") return data::all_of(prep.test);
  if (split == "dev") return data::all_of(prep.dev);
  const fs::path sp = run_dir / "split.json";
  if (!fs::is_regular_file(sp)) {
    throw DataError("split '" + split + "' needs " + sp.string() +
                    " (written next to each trained model)");
  }
  return refs_by_id(prep.dev, ids_from(io::read_json(sp), split.c_str()));
}

int cmd_evaluate(const Common& o, const EvaluateOptions& e) {
  static const std::set<std::string> splits = {"test", "train", "val", "dev"};
  if (!splits.count(e.split)) {
    throw ConfigError("--split must be one of test, train, val, dev");
  }
  if (e.split != "test") {
    std::cerr << "warning: evaluating on the '" << e.split
              << "' split; these samples were used during fitting, so the metrics are "
                 "optimistic and not comparable to test results\n";
  }
  const Prepared prep = load_prepared(e.data, o.max_len);
  const fs::path weights = e.weights;
  std::vector<fs::path> models;
  if (fs::is_directory(weights)) {
    for (std::size_t k = 0; fs::is_regular_file(weights / ("seed_" + std::to_string(k)) / "model.json"); ++k) {
      models.push_back(weights / ("seed_" + std::to_string(k)) / "model.json");
    }
    if (models.empty() && fs::is_regular_file(weights / "model.json")) {
      models.push_back(weights / "model.json");
    }
    if (models.empty()) throw DataError("no model.json found under " + weights.string());
  } else {
    require_file(weights);
    models.push_back(weights);
  }

  const fs::path out = o.out;
  fs::create_directories(out);
  Manifest m("evaluate", out);
  m.config("split=" + e.split + "\n");
  m.seed(prep.seed);
  Aggregate agg;
  std::string kind;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const model::Model mdl = io::load_model(models[i]);
    if (mdl.features != prep.features.size()) {
      throw DimensionError("model expects " + std::to_string(mdl.features) +
                           " features, prepared data has " +
                           std::to_string(prep.features.size()));
    }
    kind = model::to_string(mdl.kind);
    const data::SampleRefs refs = split_refs(prep, e.split, models[i].parent_path());
    const auto report = metrics::evaluate(model::predict_logits(mdl, refs), labels_of(refs));
    agg.add(report);
    const std::string name = models.size() == 1
                                 ? "eval_" + e.split + ".json"
                                 : "eval_" + e.split + "_" + std::to_string(i) + ".json";
    json doc = metrics::to_json(report);
    doc["split"] = e.split;
    doc["model_path"] = models[i].generic_string();
    io::write_json(out / name, doc);
    m.input(models[i]);
    m.artifact(name);
    std::cout << models[i].string() << ": AUC " << std::fixed << std::setprecision(4)
              << report.auc << ", PPV " << report.ppv << ", specificity "
              << report.specificity << "\n";
  }
  write_text(out / "comparison.csv", std::string(kComparisonHeader) + agg.csv_row(kind));
  m.artifact("comparison.csv");
  m.model(kind);
  m.write();
  std::cout << kComparisonHeader << agg.csv_row(kind);
  return kExitOk;
}

// --------------------------------------------------------------- explain

struct ExplainOptions {
  std::string weights;
  std::string data;
  std::string split = "test";
  std::string sample;
  bool global = false;
  bool risk_curves = false;
  bool decay = false;
  bool per_timestep = false;
  bool smooth = false;
  std::size_t bins = 20;
};

int cmd_explain(const Common& o, const ExplainOptions& x) {
  if (x.sample.empty() && !x.global && !x.risk_curves && !x.decay) {
    throw ConfigError("explain needs --sample, --global, --risk-curves or --decay");
  }
  if (x.split != "test" && x.split != "dev") {
    throw ConfigError("explain --split must be test or dev");
  }
  const model::Model mdl = io::load_model(x.weights);
  if (mdl.kind != model::ModelKind::irnn) {
    throw ContractError("explain: unsupported model kind " + model::to_string(mdl.kind) +
                        " (explanations need an irnn model)");
  }
  if (x.decay && !mdl.irnn.gamma_diagonal) {
    throw ContractError("explain --decay: unsupported configuration (decay weights are dense)");
  }
  const Prepared prep = load_prepared(x.data, o.max_len);
  if (mdl.features != prep.features.size()) {
    throw DimensionError("model and prepared data disagree on the feature count");
  }
  const auto& pool = x.split == "test" ? prep.test : prep.dev;
  const data::SampleRefs refs = data::all_of(pool);

  const fs::path out = o.out;
  fs::create_directories(out);
  Manifest m("explain", out);
  m.config("split=" + x.split + "\nbins=" + std::to_string(x.bins) +
           "\nsmooth=" + std::to_string(x.smooth) + "\nper_timestep=" +
           std::to_string(x.per_timestep) + "\n");
  m.seed(prep.seed);
  m.model(model::to_string(mdl.kind));
  m.input(x.weights);

  if (!x.sample.empty()) {
    const data::TimeSeriesSample* s = nullptr;
    for (const auto* p : data::all_of(prep.dev)) {
      if (p->sample_id == x.sample) s = p;
    }
    for (const auto* p : data::all_of(prep.test)) {
      if (p->sample_id == x.sample) s = p;
    }
    if (!s) throw DataError("sample '" + x.sample + "' not found in prepared data");
    const auto trace = explain::local_trace(mdl, *s, prep.features);
    const std::string name = "trace_" + x.sample + ".csv";
    explain::write_trace_csv(out / name, trace);
    m.artifact(name);
  }
  if (x.global) {
    const auto gi = explain::global_importance(mdl, refs, prep.features);
    io::write_json(out / "importance.json", explain::to_json(gi));
    m.artifact("importance.json");
    for (const auto& e : gi.ranked) {
      std::cout << e.name << " " << e.importance << "\n";
    }
  }
  if (x.risk_curves) {
    explain::RiskCurveOptions opt;
    opt.bins = x.bins;
    opt.smooth = x.smooth;
    opt.per_timestep = x.per_timestep;
    json curves = json::array();
    for (std::size_t d = 0; d < mdl.features; ++d) {
      try {
        curves.push_back(explain::to_json(explain::risk_curve(mdl, refs, d, opt, &prep.stats)));
      } catch (const DataError& e) {
        std::cerr << "note: " << e.what() << "\n";
      }
    }
    io::write_json(out / "risk_curves.json",
                   {{"schema_version", explain::kSchemaVersion}, {"curves", curves}});
    m.artifact("risk_curves.json");
  }
  if (x.decay) {
    const auto grid = explain::uniform_grid(51);
    json curves = json::array();
    for (std::size_t d = 0; d < mdl.features; ++d) {
      curves.push_back(explain::to_json(explain::decay_curve(mdl, d, grid, &prep.stats)));
    }
    io::write_json(out / "decay_curves.json",
                   {{"schema_version", explain::kSchemaVersion}, {"curves", curves}});
    m.artifact("decay_curves.json");
  }
  m.write();
  return kExitOk;
}

// --------------------------------------------------------------- compare

int cmd_compare(const Common& o, const std::vector<std::string>& run_dirs) {
  std::string table = kComparisonHeader;
  for (const auto& dir : run_dirs) {
    const fs::path p = fs::path(dir) / "summary.json";
    require_file(p);
    const json doc = io::read_json(p);
    Aggregate agg;
    try {
      for (const auto& r : doc.at("runs")) {
        agg.add(metrics::report_from_json(r.at("test")));
      }
      table += agg.csv_row(doc.at("model").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError("malformed " + p.string() + ": " + e.what());
    }
    if (agg.auc.empty()) throw DataError(p.string() + " lists no runs");
  }
  if (!o.out.empty()) {
    const fs::path out = o.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, table);
  }
  std::cout << table;
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Interpretable RNN for irregularly sampled time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "irnn 1.0.0");

  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", common.config, "Key-value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Master seed")
        ->each([&](const std::string&) { common.seed_given = true; });
    sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* out = sub->add_option("--out", common.out, "Output directory");
    if (needs_out) out->required();
    sub->add_option("--max-len", common.max_len, "Maximum sequence length")
        ->check(CLI::PositiveNumber);
  };

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth_cmd, true);

  PrepareOptions prep;
  auto* prepare_cmd = app.add_subcommand("prepare", "Hold out a test set and fit normalization");
  add_common(prepare_cmd, true);
  prepare_cmd->add_option("--data", prep.data, "Directory with events.csv and labels.csv");
  prepare_cmd->add_option("--physionet", prep.physionet, "PhysioNet 2012 record directory");
  prepare_cmd->add_option("--outcomes", prep.outcomes, "PhysioNet outcomes file");
  prepare_cmd->add_option("--features", prep.features, "Feature names in model order")
      ->delimiter(',');

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model kind over several splits");
  add_common(train_cmd, true);
  train_cmd->add_option("--data", tr.data, "Prepared data directory")->required();
  train_cmd->add_option("--model", tr.model, "irnn, gru_forward, gru_simple or logistic")
      ->required();
  train_cmd->add_option("--seeds", tr.seeds, "Number of train/validation splits");

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score trained weights");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--weights", ev.weights, "model.json or a train output directory")
      ->required();
  eval_cmd->add_option("--data", ev.data, "Prepared data directory")->required();
  eval_cmd->add_option("--split", ev.split, "test, train, val or dev");

  ExplainOptions ex;
  auto* explain_cmd = app.add_subcommand("explain", "Export explanations of an I-RNN");
  add_common(explain_cmd, true);
  explain_cmd->add_option("--weights", ex.weights, "model.json")->required();
  explain_cmd->add_option("--data", ex.data, "Prepared data directory")->required();
  explain_cmd->add_option("--split", ex.split, "test or dev");
  explain_cmd->add_option("--sample", ex.sample, "Sample id for a local trace");
  explain_cmd->add_flag("--global", ex.global, "Global feature importance");
  explain_cmd->add_flag("--risk-curves", ex.risk_curves, "Binned risk curves");
  explain_cmd->add_flag("--decay", ex.decay, "Decay-rate curves");
  explain_cmd->add_flag("--smooth", ex.smooth, "Add LOWESS-smoothed risk curves");
  explain_cmd->add_flag("--per-timestep", ex.per_timestep, "Pool risk curves over steps");
  explain_cmd->add_option("--bins", ex.bins, "Risk-curve bins")->check(CLI::PositiveNumber);

  std::vector<std::string> runs;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate train summaries");
  add_common(compare_cmd, false);
  compare_cmd->add_option("--runs", runs, "Train output directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(common);
    if (*prepare_cmd) return cmd_prepare(common, prep);
    if (*train_cmd) return cmd_train(common, tr);
    if (*eval_cmd) return cmd_evaluate(common, ev);
    if (*explain_cmd) return cmd_explain(common, ex);
    if (*compare_cmd) return cmd_compare(common, runs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace irnn::cli
