#pragma once

#include "replaygraph/linear_model.hpp"
#include "replaygraph/mlp_model.hpp"
#include "replaygraph/replay.hpp"
#include "replaygraph/tasks.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace replaygraph {

inline constexpr int kReportSchemaVersion = 1;

/// Every violation found while validating a config, one message per entry.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s;
    for (const auto& m : p) s += (s.empty() ? "" : "\n") + m;
    return s;
  }
  std::vector<std::string> problems_;
};

/// "3", "0..9" (inclusive) or "1,4,7".
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw Error("seeds: '" + text + "' is not a seed list (use N, A..B or A,B,C)");
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots));
    const auto hi = number(text.substr(dots + 2));
    if (hi < lo) throw Error("seeds: empty range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  } else {
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) seeds.push_back(number(part));
  }
  if (seeds.empty()) throw Error("seeds: empty list");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw Error("seeds: duplicate seed in '" + text + "'");
  return seeds;
}

struct ExperimentConfig {
  std::string dataset = "synthetic-sbm";
  std::string content, cites, mnist_dir;
  std::string model = "sgc";
  std::string strategy = "none";
  Index e = 1;
  Index k = 2;
  std::string propagation = "subgraph";
  Index epochs = 100;
  double lr = 0.2;
  double decay = 5e-6;
  Index batch_size = 0;
  std::vector<Index> hidden{256, 256};
  Index tasks = 3;
  Index classes_per_task = 2;
  Index train_per_class = 20;
  Index train_per_task = 1000;
  Index test_per_task = 500;
  Index sbm_block_size = 60;
  double sbm_intra_p = 0.2;
  double sbm_inter_p = 0.02;
  double sbm_noise = 0.8;
  std::string eval_mode = "task-aware";
  std::string metric = "accuracy";
  std::string fm_denominator = "m-1";
  std::string probe = "holdout";
  double probe_fraction = 0.25;
  std::string ranking = "absolute";
  std::string beta_reduction = "sum";
  std::string train_mask = "task";
  std::optional<double> coverage_distance;
  Index cg_max_iters = 0;
  double cg_tol = 1e-6;
  double cg_damping = 0.01;
  std::vector<std::uint64_t> seeds{0};
  Index jobs = 1;
  std::string out = "out";

  [[nodiscard]] bool is_graph() const { return dataset != "permuted-mnist"; }
};

namespace detail {

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "dataset",        "content",        "cites",         "mnist_dir",    "model",         "strategy",
      "e",              "k",              "propagation",   "epochs",       "lr",            "decay",
      "batch_size",     "hidden",         "tasks",         "classes_per_task", "train_per_class", "train_per_task",
      "test_per_task",  "sbm_block_size", "sbm_intra_p",   "sbm_inter_p",  "sbm_noise",     "eval_mode",
      "metric",         "fm_denominator", "probe",         "probe_fraction", "ranking",     "beta_reduction",
      "train_mask",     "coverage_distance", "cg_max_iters", "cg_tol",     "cg_damping",    "seeds",
      "jobs",           "out"};
  return keys;
}

/// Reads typed fields from a JSON object, collecting problems instead of throwing.
class FieldReader {
 public:
  explicit FieldReader(const nlohmann::json& j) : j_(j) {}

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void text(const std::string& key, std::string& out, const std::vector<std::string>& allowed = {}) {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) return fail(key + " must be a string");
    const auto v = j_.at(key).get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      return fail(key + " must be one of {" + list + "}, got '" + v + "'");
    }
    out = v;
  }

  void integer(const std::string& key, Index& out, Index min) {
    if (!has(key)) return;
    if (!j_.at(key).is_number_integer()) return fail(key + " must be an integer");
    const auto v = j_.at(key).get<Index>();
    if (v < min) return fail(key + " must be ≥ " + std::to_string(min));
    out = v;
  }

  void real(const std::string& key, double& out, double min, double max, bool min_exclusive = false) {
    if (!has(key)) return;
    if (!j_.at(key).is_number()) return fail(key + " must be a number");
    const auto v = j_.at(key).get<double>();
    if (!std::isfinite(v) || v < min || v > max || (min_exclusive && v == min)) {
      std::ostringstream msg;
      msg << key << " must be in " << (min_exclusive ? "(" : "[") << min << ", " << max << "]";
      return fail(msg.str());
    }
    out = v;
  }

  void fail(std::string message) { problems.push_back(std::move(message)); }

  std::vector<std::string> problems;

 private:
  const nlohmann::json& j_;
};

inline std::string data_root() {
  const char* root = std::getenv("REPLAYGRAPH_DATA_DIR");
  return root ? root : "";
}

}  // namespace detail

/// Parses and validates a config object. Model-dependent defaults (epochs, lr,
/// decay, batch size, CG tolerance, task count) apply where a key is absent.
/// Throws ConfigError listing every problem.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  ExperimentConfig c;
  detail::FieldReader r(j);
  const auto& keys = detail::config_keys();
  for (const auto& [key, value] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) r.fail(key + ": unknown key");

  r.text("dataset", c.dataset, {"cora", "citeseer", "synthetic-sbm", "permuted-mnist"});
  r.text("model", c.model, {"sgc", "mlp"});
  if (!r.has("model") && c.dataset == "permuted-mnist") c.model = "mlp";
  const bool mlp = c.model == "mlp";
  if (mlp) {
    c.epochs = 10;
    c.lr = 1e-3;
    c.decay = 1e-5;
    c.batch_size = 64;
    c.cg_tol = 1e-3;
  }
  if (c.dataset == "permuted-mnist") c.tasks = 5;

  r.text("content", c.content);
  r.text("cites", c.cites);
  r.text("mnist_dir", c.mnist_dir);
  r.text("strategy", c.strategy, {"none", "random", "mf", "mf-embed", "cm", "cm-embed", "im"});
  r.integer("e", c.e, 1);
  r.integer("k", c.k, 0);
  r.text("propagation", c.propagation, {"subgraph", "full"});
  r.integer("epochs", c.epochs, 0);
  r.real("lr", c.lr, 0.0, 1e6, true);
  r.real("decay", c.decay, 0.0, 1e6);
  r.integer("batch_size", c.batch_size, 0);
  if (r.has("hidden")) {
    if (!j.at("hidden").is_array()) {
      r.fail("hidden must be an array of layer widths");
    } else {
      c.hidden.clear();
      for (const auto& w : j.at("hidden")) {
        if (!w.is_number_integer() || w.get<Index>() < 1) {
          r.fail("hidden must contain integers ≥ 1");
          break;
        }
        c.hidden.push_back(w.get<Index>());
      }
    }
  }
  r.integer("tasks", c.tasks, 1);
  r.integer("classes_per_task", c.classes_per_task, 1);
  r.integer("train_per_class", c.train_per_class, 1);
  r.integer("train_per_task", c.train_per_task, 1);
  r.integer("test_per_task", c.test_per_task, 1);
  r.integer("sbm_block_size", c.sbm_block_size, 2);
  r.real("sbm_intra_p", c.sbm_intra_p, 0.0, 1.0);
  r.real("sbm_inter_p", c.sbm_inter_p, 0.0, 1.0);
  r.real("sbm_noise", c.sbm_noise, 0.0, 1e6);
  r.text("eval_mode", c.eval_mode, {"task-aware", "class-incremental"});
  r.text("metric", c.metric, {"accuracy", "micro_f1"});
  r.text("fm_denominator", c.fm_denominator, {"m-1", "m"});
  r.text("probe", c.probe, {"holdout", "test"});
  r.real("probe_fraction", c.probe_fraction, 0.0, 1.0, true);
  r.text("ranking", c.ranking, {"absolute", "signed"});
  r.text("beta_reduction", c.beta_reduction, {"sum", "mean"});
  r.text("train_mask", c.train_mask, {"task", "seen"});
  if (r.has("coverage_distance")) {
    double d = 0.0;
    r.real("coverage_distance", d, 0.0, 1e300, true);
    c.coverage_distance = d;
  }
  r.integer("cg_max_iters", c.cg_max_iters, 0);
  r.real("cg_tol", c.cg_tol, 0.0, 1.0, true);
  r.real("cg_damping", c.cg_damping, 0.0, 1e6);
  if (r.has("seeds")) {
    const auto& s = j.at("seeds");
    try {
      if (s.is_string()) {
        c.seeds = parse_seeds(s.get<std::string>());
      } else if (s.is_array() && !s.empty()) {
        std::string list;
        for (const auto& v : s) {
          if (!v.is_number_unsigned()) throw Error("seeds must be non-negative integers");
          list += (list.empty() ? "" : ",") + std::to_string(v.get<std::uint64_t>());
        }
        c.seeds = parse_seeds(list);
      } else if (s.is_number_unsigned()) {
        c.seeds = {s.get<std::uint64_t>()};
      } else {
        throw Error("seeds must be a string (\"0..9\"), an integer or a non-empty array");
      }
    } catch (const Error& ex) {
      r.fail(ex.what());
    }
  }
  r.integer("jobs", c.jobs, 1);
  r.text("out", c.out);

  // dataset paths: explicit keys, else REPLAYGRAPH_DATA_DIR
  const std::string root = detail::data_root();
  auto require_file = [&](const std::string& key, std::string& path, const std::string& default_rel) {
    if (path.empty() && !root.empty()) path = (std::filesystem::path(root) / default_rel).string();
    if (path.empty())
      r.fail(key + ": missing dataset path (set " + key + " or REPLAYGRAPH_DATA_DIR)");
    else if (!std::filesystem::exists(path))
      r.fail(key + ": no such file or directory '" + path + "'");
  };
  if (c.dataset == "cora" || c.dataset == "citeseer") {
    require_file("content", c.content, c.dataset + "/" + c.dataset + ".content");
    require_file("cites", c.cites, c.dataset + "/" + c.dataset + ".cites");
  } else if (c.dataset == "permuted-mnist") {
    require_file("mnist_dir", c.mnist_dir, "mnist");
    if (c.model != "mlp") r.fail("model: permuted-mnist requires model mlp");
  }
  if (c.dataset == "synthetic-sbm" && c.sbm_block_size <= c.train_per_class)
    r.fail("sbm_block_size must exceed train_per_class");

  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"dataset", c.dataset},
                   {"model", c.model},
                   {"strategy", c.strategy},
                   {"e", c.e},
                   {"epochs", c.epochs},
                   {"lr", c.lr},
                   {"decay", c.decay},
                   {"batch_size", c.batch_size},
                   {"tasks", c.tasks},
                   {"eval_mode", c.eval_mode},
                   {"metric", c.metric},
                   {"fm_denominator", c.fm_denominator},
                   {"probe", c.probe},
                   {"probe_fraction", c.probe_fraction},
                   {"ranking", c.ranking},
                   {"beta_reduction", c.beta_reduction},
                   {"train_mask", c.train_mask},
                   {"coverage_distance", c.coverage_distance ? nlohmann::json(*c.coverage_distance) : nlohmann::json()},
                   {"cg_max_iters", c.cg_max_iters},
                   {"cg_tol", c.cg_tol},
                   {"cg_damping", c.cg_damping},
                   {"seeds", c.seeds},
                   {"out", c.out}};
  if (c.model == "mlp") j["hidden"] = c.hidden;
  if (c.is_graph()) {
    j["k"] = c.k;
    j["propagation"] = c.propagation;
    j["classes_per_task"] = c.classes_per_task;
    j["train_per_class"] = c.train_per_class;
  } else {
    j["mnist_dir"] = c.mnist_dir;
    j["train_per_task"] = c.train_per_task;
    j["test_per_task"] = c.test_per_task;
  }
  if (c.dataset == "cora" || c.dataset == "citeseer") {
    j["content"] = c.content;
    j["cites"] = c.cites;
  }
  if (c.dataset == "synthetic-sbm") {
    j["sbm_block_size"] = c.sbm_block_size;
    j["sbm_intra_p"] = c.sbm_intra_p;
    j["sbm_inter_p"] = c.sbm_inter_p;
    j["sbm_noise"] = c.sbm_noise;
  }
  return j;
}

/// Reads a JSON config file; `overrides` (e.g. from flags) win key by key.
inline ExperimentConfig load_config(const std::filesystem::path& path, const nlohmann::json& overrides = nlohmann::json::object()) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot open '" + path.string() + "'"});
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
      throw ConfigError({"config: " + path.string() + ": " + ex.what()});
    }
  }
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  for (const auto& [key, value] : overrides.items()) j[key] = value;
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  AccuracyMatrix matrix;
  MetricsReport metrics;
  std::vector<TaskEvent> events;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single run
};

inline Aggregate aggregate(const std::vector<double>& v) {
  if (v.empty()) throw Error("aggregate: no values");
  Aggregate a;
  for (double x : v) a.mean += x;
  a.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::string> label_order;
  std::vector<SeedResult> runs;
  Aggregate pm, fm;
};

/// Data shared by all seeds of one experiment.
struct LoadedData {
  std::optional<CitationDataset> citation;
  std::optional<ImageSet> images;
};

inline LoadedData load_data(const ExperimentConfig& c) {
  LoadedData d;
  if (c.dataset == "cora" || c.dataset == "citeseer") d.citation = load_citation_dataset(c.content, c.cites);
  if (c.dataset == "permuted-mnist") d.images = load_mnist(c.mnist_dir);
  return d;
}

inline StrategyKind strategy_kind(const std::string& s) {
  if (s == "none") return StrategyKind::none;
  if (s == "random") return StrategyKind::random;
  if (s == "mf") return StrategyKind::mf_attribute;
  if (s == "mf-embed") return StrategyKind::mf_embedding;
  if (s == "cm") return StrategyKind::cm_attribute;
  if (s == "cm-embed") return StrategyKind::cm_embedding;
  if (s == "im") return StrategyKind::im;
  throw Error("unknown strategy '" + s + "'");
}

namespace detail {

template <DifferentiableModel M>
SeedResult finish_run(M model, const std::vector<PreparedTask>& tasks, const ExperimentConfig& c, std::uint64_t seed,
                      bool shared_classes) {
  SelectionConfig sel;
  sel.kind = strategy_kind(c.strategy);
  sel.coverage_distance = c.coverage_distance;
  sel.ranking = c.ranking == "absolute" ? InfluenceRanking::absolute : InfluenceRanking::signed_descending;
  sel.cg = CgSettings{c.cg_max_iters, c.cg_tol, c.cg_damping};
  sel.seed = seed;

  ReplayConfig rc;
  rc.e = c.e;
  rc.train.epochs = c.epochs;
  rc.train.adam.lr = c.lr;
  rc.train.batch_size = c.batch_size;
  rc.train.seed = seed;
  rc.weight_decay = c.decay;
  rc.eval_mode = c.eval_mode == "task-aware" ? EvalMode::task_aware : EvalMode::class_incremental;
  rc.metric = c.metric == "accuracy" ? MetricKind::accuracy : MetricKind::micro_f1;
  rc.beta_reduction = c.beta_reduction == "sum" ? BetaReduction::sum : BetaReduction::mean;
  rc.train_mask = c.train_mask == "task" ? TrainMaskScope::task : TrainMaskScope::seen;
  rc.allow_shared_classes = shared_classes;

  RunState<M> state = run_sequence(std::move(model), tasks, sel, rc);
  SeedResult r;
  r.seed = seed;
  r.metrics = summarize(state.accuracy, rc.eval_mode, rc.metric,
                        c.fm_denominator == "m-1" ? FmDenominator::m_minus_1 : FmDenominator::m);
  r.matrix = std::move(state.accuracy);
  r.events = std::move(state.events);
  return r;
}

}  // namespace detail

/// One full task sequence for one seed.
inline SeedResult run_seed(const ExperimentConfig& c, const LoadedData& data, std::uint64_t seed) {
  TaskPreparation prep;
  prep.propagation_depth = c.k;
  prep.scope = c.propagation == "subgraph" ? PropagationScope::task_subgraph : PropagationScope::full_graph;
  prep.probes = c.probe == "holdout" ? ProbePolicy::holdout : ProbePolicy::test;
  prep.carve_probes = c.strategy == "im" && prep.probes == ProbePolicy::holdout;
  prep.probe_fraction = c.probe_fraction;
  prep.seed = seed;

  if (c.dataset == "permuted-mnist") {
    if (!data.images) throw Error("run: image data not loaded");
    const auto image_tasks = make_permuted_tasks(*data.images, c.tasks, c.train_per_task, c.test_per_task, seed);
    const auto tasks = prepare_image_tasks(image_tasks, 10, prep);
    std::vector<Index> sizes{data.images->images.cols()};
    sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
    sizes.push_back(10);
    return detail::finish_run(MlpModel::he_init(sizes, seed), tasks, c, seed, true);
  }

  Graph g;
  if (data.citation) {
    g = data.citation->graph;
  } else {
    const std::vector<Index> blocks(static_cast<std::size_t>(c.tasks * c.classes_per_task), c.sbm_block_size);
    g = synthetic_sbm_graph(blocks, c.sbm_intra_p, c.sbm_inter_p, c.sbm_noise, seed);
  }
  const auto tasks = prepare_graph_tasks(build_task_sequence(g, c.classes_per_task, c.tasks, c.train_per_class, seed), prep);
  const Index dim = tasks.front().train.samples.dim();
  if (c.model == "sgc") return detail::finish_run(LinearModel(g.class_count, dim), tasks, c, seed, false);
  std::vector<Index> sizes{dim};
  sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
  sizes.push_back(g.class_count);
  return detail::finish_run(MlpModel::he_init(sizes, seed), tasks, c, seed, false);
}

/// Runs every seed (on up to `jobs` threads) and aggregates in seed order.
inline ExperimentResult run_experiment(const ExperimentConfig& c, const LoadedData& data) {
  ExperimentResult res;
  res.config = c;
  if (data.citation) {
    res.label_order = data.citation->label_names;
  } else if (data.images) {
    for (int d = 0; d < 10; ++d) res.label_order.push_back(std::to_string(d));
  } else {
    for (Index b = 0; b < c.tasks * c.classes_per_task; ++b) res.label_order.push_back("block" + std::to_string(b));
  }
  res.runs.resize(c.seeds.size());
  std::vector<std::exception_ptr> failures(c.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.seeds.size(); i = next++) {
      try {
        res.runs[i] = run_seed(c, data, c.seeds[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(c.jobs), c.seeds.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::vector<double> pms, fms;
  for (const auto& r : res.runs) {
    pms.push_back(r.metrics.pm);
    fms.push_back(r.metrics.fm);
  }
  res.pm = aggregate(pms);
  res.fm = aggregate(fms);
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) { return run_experiment(c, load_data(c)); }

inline nlohmann::json report_json(const ExperimentResult& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : r.runs) {
    auto m = to_json(s.metrics);
    m["seed"] = s.seed;
    runs.push_back(m);
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config", to_json(r.config)},
          {"label_order", r.label_order},
          {"pm", {{"mean", r.pm.mean}, {"std", r.pm.std}}},
          {"fm", {{"mean", r.fm.mean}, {"std", r.fm.std}}},
          {"fm_denominator", r.config.fm_denominator},
          {"eval_mode", r.config.eval_mode},
          {"runs", runs}};
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// report.json, matrix_seed<k>.csv and runlog_seed<k>.jsonl under `dir`.
inline void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::open_output(dir / "report.json") << report_json(r).dump(2) << '\n';
  for (const auto& s : r.runs) {
    const std::string k = std::to_string(s.seed);
    auto csv = detail::open_output(dir / ("matrix_seed" + k + ".csv"));
    s.matrix.write_csv(csv);
    auto log = detail::open_output(dir / ("runlog_seed" + k + ".jsonl"));
    for (const auto& ev : s.events) log << to_json(ev).dump() << '\n';
  }
}

/// `run`: every seed, then artifacts under config.out.
inline ExperimentResult run(const ExperimentConfig& c) {
  ExperimentResult r = run_experiment(c);
  write_artifacts(r, c.out);
  return r;
}

struct SweepRow {
  Index e = 0;
  Aggregate pm, fm;
};

/// One aggregate per e (artifacts under out/e<e>/) plus out/sweep_e.csv.
inline std::vector<SweepRow> sweep_e(const ExperimentConfig& c, const std::vector<Index>& e_values) {
  if (e_values.empty()) throw Error("sweep_e: no e values");
  if (std::set<Index>(e_values.begin(), e_values.end()).size() != e_values.size())
    throw Error("sweep_e: duplicate e values");
  for (Index e : e_values)
    if (e < 1) throw Error("sweep_e: e must be ≥ 1");
  const LoadedData data = load_data(c);
  std::vector<SweepRow> rows;
  for (Index e : e_values) {
    ExperimentConfig ce = c;
    ce.e = e;
    const ExperimentResult r = run_experiment(ce, data);
    write_artifacts(r, std::filesystem::path(c.out) / ("e" + std::to_string(e)));
    rows.push_back(SweepRow{e, r.pm, r.fm});
  }
  std::filesystem::create_directories(c.out);
  auto csv = detail::open_output(std::filesystem::path(c.out) / "sweep_e.csv");
  csv << "e,pm,fm\n";
  for (const auto& row : rows) csv << row.e << ',' << row.pm.mean << ',' << row.fm.mean << '\n';
  return rows;
}

}  // namespace replaygraph
