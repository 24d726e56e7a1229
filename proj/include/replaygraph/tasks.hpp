#pragma once

#include "replaygraph/data_io.hpp"
#include "replaygraph/graph.hpp"
#include "replaygraph/replay.hpp"

namespace replaygraph {

enum class PropagationScope { task_subgraph, full_graph };
/// Influence probes: a held-out slice of the training nodes, or the task's test nodes.
enum class ProbePolicy { holdout, test };

struct TaskPreparation {
  Index propagation_depth = 2;
  PropagationScope scope = PropagationScope::task_subgraph;
  ProbePolicy probes = ProbePolicy::holdout;
  /// Carve probes out of the training set (only meaningful with ProbePolicy::holdout).
  bool carve_probes = false;
  double probe_fraction = 0.25;
  std::uint64_t seed = 0;
};

namespace detail {

/// Splits rows into (kept, probes): floor(fraction * n) probes per class, at least one,
/// while keeping at least one training row per class.
inline std::pair<std::vector<Index>, std::vector<Index>> carve_per_class(const std::vector<ClassId>& labels, double fraction,
                                                                         std::uint64_t seed) {
  std::map<ClassId, std::vector<Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Index>(i));
  std::vector<Index> keep, probe;
  for (auto& [c, rows] : groups) {
    if (rows.size() < 2) throw Error("probe holdout: class " + std::to_string(c) + " has fewer than 2 training samples");
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_probe = static_cast<std::size_t>(fraction * static_cast<double>(rows.size()));
    n_probe = std::clamp<std::size_t>(n_probe, 1, rows.size() - 1);
    probe.insert(probe.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_probe));
    keep.insert(keep.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_probe), rows.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(probe.begin(), probe.end());
  return {keep, probe};
}

inline void finish_probes(PreparedTask& task, const TaskPreparation& prep) {
  if (prep.probes == ProbePolicy::test || !prep.carve_probes) {
    task.probes = task.test;
    return;
  }
  auto [keep, probe] = carve_per_class(task.train.samples.labels, prep.probe_fraction,
                                       derive_seed(prep.seed, 0x9e37 + static_cast<std::uint64_t>(task.task_id)));
  task.probes = task.train.samples.subset(probe);
  std::vector<Index> sources;
  Matrix attrs(static_cast<Index>(keep.size()), task.train_attributes.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    sources.push_back(task.train.source_nodes[static_cast<std::size_t>(keep[k])]);
    attrs.row(static_cast<Index>(k)) = task.train_attributes.row(keep[k]);
  }
  task.train = CandidatePool{task.train.samples.subset(keep), std::move(sources)};
  task.train_attributes = std::move(attrs);
}

inline SampleSet gather_rows(const Matrix& values, const std::vector<ClassId>& labels, const std::vector<Index>& rows) {
  Matrix x(static_cast<Index>(rows.size()), values.cols());
  std::vector<ClassId> y;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Index>(i)) = values.row(rows[i]);
    y.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return SampleSet(std::move(x), std::move(y));
}

}  // namespace detail

/// Propagates features per task and freezes them as model inputs.
inline std::vector<PreparedTask> prepare_graph_tasks(const TaskSequence& seq, const TaskPreparation& prep) {
  const Graph& g = seq.graph;
  std::optional<PropagatedFeatures> full;
  if (prep.scope == PropagationScope::full_graph) full = propagate(normalize_adjacency(g), g.features, prep.propagation_depth);

  std::vector<PreparedTask> out;
  for (const auto& spec : seq.tasks) {
    Matrix inputs;  // indexed by original node id for the task's nodes
    std::vector<Index> local(static_cast<std::size_t>(g.num_nodes), -1);
    if (full) {
      inputs = full->values;
      for (Index u = 0; u < g.num_nodes; ++u) local[static_cast<std::size_t>(u)] = u;
    } else {
      const auto nodes = spec.all_nodes();
      const InducedSubgraph sub = induced_subgraph(g, nodes);
      inputs = propagate(normalize_adjacency(sub.graph), sub.graph.features, prep.propagation_depth).values;
      local = sub.new_index;
    }
    auto rows_of = [&](const std::vector<Index>& nodes) {
      std::vector<Index> r;
      for (Index u : nodes) r.push_back(local[static_cast<std::size_t>(u)]);
      return r;
    };
    std::vector<ClassId> local_labels(static_cast<std::size_t>(inputs.rows()));
    for (Index u = 0; u < g.num_nodes; ++u)
      if (local[static_cast<std::size_t>(u)] >= 0)
        local_labels[static_cast<std::size_t>(local[static_cast<std::size_t>(u)])] = g.labels[static_cast<std::size_t>(u)];

    PreparedTask task;
    task.task_id = spec.task_id;
    task.classes = spec.classes;
    task.train = CandidatePool{detail::gather_rows(inputs, local_labels, rows_of(spec.train_nodes)), spec.train_nodes};
    task.train_attributes.resize(static_cast<Index>(spec.train_nodes.size()), g.feature_dim());
    for (std::size_t i = 0; i < spec.train_nodes.size(); ++i)
      task.train_attributes.row(static_cast<Index>(i)) = g.features.row(spec.train_nodes[i]);
    task.test = detail::gather_rows(inputs, local_labels, rows_of(spec.test_nodes));
    detail::finish_probes(task, prep);
    out.push_back(std::move(task));
  }
  return out;
}

/// Permuted-image tasks; the label space (all digits) is shared across tasks.
inline std::vector<PreparedTask> prepare_image_tasks(const std::vector<ImageTask>& tasks, ClassId class_count,
                                                     const TaskPreparation& prep) {
  std::vector<PreparedTask> out;
  for (const auto& t : tasks) {
    PreparedTask task;
    task.task_id = t.task_id;
    task.classes = ClassMask::range(class_count);
    task.train = CandidatePool{SampleSet(t.train_images, t.train_labels), t.train_source};
    task.train_attributes = t.train_images;
    task.test = SampleSet(t.test_images, t.test_labels);
    detail::finish_probes(task, prep);
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace replaygraph
