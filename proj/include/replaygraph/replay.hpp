#pragma once

#include "replaygraph/metrics.hpp"
#include "replaygraph/model.hpp"
#include "replaygraph/selection.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <utility>

namespace replaygraph {

/// A task ready for training: model inputs are already computed.
struct PreparedTask {
  int task_id = 0;
  ClassMask classes;
  /// Training samples; also the selection candidates.
  CandidatePool train;
  /// Raw attribute vectors aligned with `train` (MF/CM attribute representation).
  Matrix train_attributes;
  /// Probe set for influence maximization.
  SampleSet probes;
  SampleSet test;
};

/// Grows by at most e items per (origin task, class); never evicts.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(Index per_class_capacity = 1) : capacity_(per_class_capacity) {
    if (per_class_capacity < 1) throw Error("experience buffer: e must be >= 1");
  }

  void add(const std::vector<ExperienceItem>& items) {
    for (const auto& item : items) {
      if (!item.input.allFinite()) throw Error("experience buffer: non-finite input");
      if (!items_.empty() && item.input.size() != items_.front().input.size())
        throw DimensionError("experience buffer: input dimension mismatch");
      auto& n = counts_[{item.origin_task, item.label}];
      if (n >= capacity_)
        throw Error("experience buffer: more than e items for class " + std::to_string(item.label) + " of task " +
                    std::to_string(item.origin_task));
      ++n;
      items_.push_back(item);
    }
  }

  [[nodiscard]] const std::vector<ExperienceItem>& items() const { return items_; }
  [[nodiscard]] Index size() const { return static_cast<Index>(items_.size()); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] Index capacity_per_class() const { return capacity_; }
  [[nodiscard]] Index count(int origin_task, ClassId label) const {
    auto it = counts_.find({origin_task, label});
    return it == counts_.end() ? 0 : it->second;
  }

  [[nodiscard]] ClassMask classes() const {
    std::vector<ClassId> ids;
    for (const auto& item : items_) ids.push_back(item.label);
    return ClassMask(std::move(ids));
  }

  [[nodiscard]] SampleSet samples() const {
    if (items_.empty()) return {};
    Matrix x(size(), items_.front().input.size());
    std::vector<ClassId> y;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      x.row(static_cast<Index>(i)) = items_[i].input.transpose();
      y.push_back(items_[i].label);
    }
    return SampleSet(std::move(x), std::move(y));
  }

 private:
  Index capacity_;
  std::vector<ExperienceItem> items_;
  std::map<std::pair<int, ClassId>, Index> counts_;
};

/// beta = |B| / (|D| + |B|).
inline double weight_factor(Index train_count, Index buffer_count) {
  if (train_count < 1) throw Error("weight_factor: train_count must be >= 1");
  if (buffer_count < 0) throw Error("weight_factor: buffer_count must be >= 0");
  return static_cast<double>(buffer_count) / static_cast<double>(train_count + buffer_count);
}

/// Whether beta weights summed losses (default) or per-set means.
enum class BetaReduction { sum, mean };

/// beta * L(train) + (1 - beta) * L(buffer) with an explicit beta.
inline Objective combined_objective_with_beta(const SampleSet& train, const ClassMask& train_mask, const SampleSet& buffer,
                                              const ClassMask& buffer_mask, double beta, double weight_decay = 0.0,
                                              BetaReduction reduction = BetaReduction::sum) {
  if (train.empty()) throw Error("combined objective: training set is empty");
  Objective obj;
  obj.weight_decay = weight_decay;
  const bool mean = reduction == BetaReduction::mean;
  obj.terms.push_back(LossTerm{std::cref(train), train_mask, mean ? beta / static_cast<double>(train.size()) : beta});
  if (!buffer.empty())
    obj.terms.push_back(
        LossTerm{std::cref(buffer), buffer_mask, mean ? (1.0 - beta) / static_cast<double>(buffer.size()) : 1.0 - beta});
  return obj;
}

/// The replay objective. With an empty buffer it is L(train) unweighted.
inline Objective combined_objective(const SampleSet& train, const ClassMask& train_mask, const SampleSet& buffer,
                                    const ClassMask& buffer_mask, double weight_decay = 0.0,
                                    BetaReduction reduction = BetaReduction::sum) {
  if (buffer.empty()) {
    if (train.empty()) throw Error("combined objective: training set is empty");
    Objective obj = single_term(train, train_mask, weight_decay);
    if (reduction == BetaReduction::mean) obj.terms.front().scale = 1.0 / static_cast<double>(train.size());
    return obj;
  }
  return combined_objective_with_beta(train, train_mask, buffer, buffer_mask, weight_factor(train.size(), buffer.size()),
                                      weight_decay, reduction);
}

template <DifferentiableModel M>
double combined_loss(const M& model, const SampleSet& train, const ClassMask& train_mask, const SampleSet& buffer,
                     const ClassMask& buffer_mask, BetaReduction reduction = BetaReduction::sum) {
  return model.objective_value_and_gradient(combined_objective(train, train_mask, buffer, buffer_mask, 0.0, reduction)).first;
}

/// Which classes the current-task loss normalizes over.
enum class TrainMaskScope { task, seen };

struct SelectionConfig {
  StrategyKind kind = StrategyKind::none;
  std::optional<double> coverage_distance;  ///< nullopt: median cross-class distance
  InfluenceRanking ranking = InfluenceRanking::absolute;
  /// max_iters <= 0 means min(parameter_count, 200)
  CgSettings cg{0, 1e-6, 0.01};
  std::uint64_t seed = 0;
};

struct ReplayConfig {
  Index e = 1;
  TrainConfig train;
  double weight_decay = 5e-6;
  EvalMode eval_mode = EvalMode::task_aware;
  MetricKind metric = MetricKind::accuracy;
  BetaReduction beta_reduction = BetaReduction::sum;
  TrainMaskScope train_mask = TrainMaskScope::task;
  /// Domain-incremental sequences (permuted images) reuse the same classes.
  bool allow_shared_classes = false;
};

struct TaskEvent {
  int task_id = 0;
  double beta = 0.0;
  Index train_count = 0;
  Index buffer_before = 0;
  Index buffer_after = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  Index cg_iterations = 0;
  bool cg_converged = true;
  std::vector<double> accuracy_row;
  std::vector<TraceRow> selection_trace;
};

inline nlohmann::json to_json(const TaskEvent& ev) {
  return {{"task_id", ev.task_id},
          {"beta", ev.beta},
          {"train_count", ev.train_count},
          {"buffer_before", ev.buffer_before},
          {"buffer_size", ev.buffer_after},
          {"initial_loss", ev.initial_loss},
          {"final_loss", ev.final_loss},
          {"cg_iterations", ev.cg_iterations},
          {"cg_converged", ev.cg_converged},
          {"accuracy_row", ev.accuracy_row}};
}

struct EvalTask {
  int task_id = 0;
  ClassMask classes;
  SampleSet test;
};

template <DifferentiableModel M>
struct RunState {
  M model;
  ExperienceBuffer buffer;
  AccuracyMatrix accuracy;
  /// Parameters right after each task.
  std::vector<Vector> snapshots;
  std::vector<TaskEvent> events;
  std::vector<EvalTask> seen;
  ReplayConfig config;

  RunState(M initial, ReplayConfig cfg) : model(std::move(initial)), buffer(cfg.e), config(std::move(cfg)) {}
};

/// Row of A for the current parameters over every task seen so far.
template <DifferentiableModel M>
std::vector<double> evaluate_seen(const M& model, const std::vector<EvalTask>& seen, EvalMode mode, MetricKind metric) {
  std::vector<double> row;
  for (const auto& t : seen) {
    const ClassMask& mask = mode == EvalMode::task_aware ? t.classes : model.active_classes();
    row.push_back(score_predictions(metric, predict(model, t.test.inputs, mask), t.test.labels));
  }
  return row;
}

template <DifferentiableModel M>
Selection run_selection(const M& model, const Objective& training, const PreparedTask& task, const ClassMask& train_mask,
                        const SelectionConfig& sel, Index e, CgResult* cg_report) {
  switch (sel.kind) {
    case StrategyKind::none:
      return {};
    case StrategyKind::random:
      return select_random(task.train, task.classes, e, derive_seed(sel.seed, static_cast<std::uint64_t>(task.task_id)),
                           task.task_id);
    case StrategyKind::mf_attribute:
      return select_mf(task.train, task.classes, task.train_attributes, e, task.task_id);
    case StrategyKind::mf_embedding:
      return select_mf(task.train, task.classes, model.embed(task.train.samples.inputs), e, task.task_id);
    case StrategyKind::cm_attribute:
      return select_cm(task.train, task.classes, task.train_attributes, e, sel.coverage_distance, task.task_id);
    case StrategyKind::cm_embedding:
      return select_cm(task.train, task.classes, model.embed(task.train.samples.inputs), e, sel.coverage_distance,
                       task.task_id);
    case StrategyKind::im: {
      CgSettings cg = sel.cg;
      if (cg.max_iters <= 0) cg.max_iters = std::min<Index>(model.parameter_count(), 200);
      return select_im(model, training, task.train, task.classes, train_mask, task.probes, task.classes, e, cg,
                       sel.ranking, task.task_id, cg_report);
    }
  }
  return {};
}

/// One pass of the replay loop: train on task + buffer, select, store, evaluate.
template <DifferentiableModel M>
void learn_task(RunState<M>& state, const PreparedTask& task, const SelectionConfig& selection) {
  const ReplayConfig& cfg = state.config;
  if (task.train.size() == 0) throw Error("learn_task: task " + std::to_string(task.task_id) + " has no training samples");
  if (task.train.samples.dim() != state.model.input_dim())
    throw DimensionError("learn_task: task inputs do not match the model input dimension");
  if (!cfg.allow_shared_classes)
    for (ClassId c : task.classes)
      if (state.model.active_classes().contains(c))
        throw Error("learn_task: class " + std::to_string(c) + " was already learned");

  state.model.activate(task.classes);
  const ClassMask train_mask = cfg.train_mask == TrainMaskScope::task ? task.classes : state.model.active_classes();
  const SampleSet buffer_samples = state.buffer.samples();
  const ClassMask buffer_mask = state.buffer.classes();
  const Objective objective = combined_objective(task.train.samples, train_mask, buffer_samples, buffer_mask,
                                                 cfg.weight_decay, cfg.beta_reduction);

  TaskEvent ev;
  ev.task_id = task.task_id;
  ev.train_count = task.train.size();
  ev.buffer_before = state.buffer.size();
  ev.beta = buffer_samples.empty() ? 0.0 : weight_factor(task.train.size(), buffer_samples.size());

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(task.task_id));
  const TrainReport tr = fit(state.model, objective, tc);
  ev.initial_loss = tr.initial_loss;
  ev.final_loss = tr.final_loss;

  CgResult cg;
  Selection chosen = run_selection(state.model, objective, task, train_mask, selection, cfg.e, &cg);
  ev.cg_iterations = cg.iterations;
  ev.cg_converged = selection.kind != StrategyKind::im || cg.converged;
  state.buffer.add(chosen.items);
  ev.buffer_after = state.buffer.size();
  ev.selection_trace = std::move(chosen.trace);

  state.seen.push_back(EvalTask{task.task_id, task.classes, task.test});
  ev.accuracy_row = evaluate_seen(state.model, state.seen, cfg.eval_mode, cfg.metric);
  state.accuracy.append_row(ev.accuracy_row);
  state.snapshots.push_back(state.model.parameters());
  state.events.push_back(std::move(ev));
}

template <DifferentiableModel M>
RunState<M> run_sequence(M initial, const std::vector<PreparedTask>& tasks, const SelectionConfig& selection,
                         const ReplayConfig& config) {
  RunState<M> state(std::move(initial), config);
  for (const auto& task : tasks) learn_task(state, task, selection);
  return state;
}

}  // namespace replaygraph
