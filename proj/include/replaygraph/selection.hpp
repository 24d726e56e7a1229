#pragma once

#include "replaygraph/cg.hpp"
#include "replaygraph/data_io.hpp"
#include "replaygraph/model.hpp"

#include <map>
#include <numeric>
#include <ostream>

namespace replaygraph {

/// A stored training example. `input` is the model input captured at selection time.
struct ExperienceItem {
  Vector input;
  ClassId label = 0;
  int origin_task = 0;
  Index source_node = 0;
};

/// Selection candidates of one task: model inputs plus the original node / image index.
struct CandidatePool {
  SampleSet samples;
  std::vector<Index> source_nodes;

  [[nodiscard]] Index size() const { return samples.size(); }
};

enum class StrategyKind { none, random, mf_attribute, mf_embedding, cm_attribute, cm_embedding, im };
enum class InfluenceRanking { absolute, signed_descending };

struct TraceRow {
  ClassId label = 0;
  Index source_node = 0;
  double score = 0.0;
  bool selected = false;
};

struct Selection {
  std::vector<ExperienceItem> items;
  /// One row per candidate: the ranking key of the strategy.
  std::vector<TraceRow> trace;
};

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "label,source_node,score,selected\n";
  for (const auto& r : trace) out << r.label << ',' << r.source_node << ',' << r.score << ',' << (r.selected ? 1 : 0) << '\n';
}

namespace detail {

/// Rows of each class in `classes`, ascending by source node.
inline std::map<ClassId, std::vector<Index>> rows_by_class(const CandidatePool& pool, const ClassMask& classes) {
  if (static_cast<Index>(pool.source_nodes.size()) != pool.size())
    throw DimensionError("candidate pool: source_nodes length mismatch");
  std::map<ClassId, std::vector<Index>> groups;
  for (ClassId c : classes) groups[c];
  for (Index i = 0; i < pool.size(); ++i) {
    const ClassId y = pool.samples.labels[static_cast<std::size_t>(i)];
    if (!classes.contains(y)) throw Error("candidate label " + std::to_string(y) + " outside the task classes");
    groups[y].push_back(i);
  }
  for (auto& [c, rows] : groups) {
    if (rows.empty()) throw Error("selection: class " + std::to_string(c) + " has no candidates");
    std::stable_sort(rows.begin(), rows.end(), [&](Index a, Index b) {
      return pool.source_nodes[static_cast<std::size_t>(a)] < pool.source_nodes[static_cast<std::size_t>(b)];
    });
  }
  return groups;
}

inline ExperienceItem make_item(const CandidatePool& pool, Index row, int origin_task) {
  return ExperienceItem{pool.samples.inputs.row(row).transpose(), pool.samples.labels[static_cast<std::size_t>(row)],
                        origin_task, pool.source_nodes[static_cast<std::size_t>(row)]};
}

/// Picks the first e rows of each class by ascending key (ties: lower source node).
inline Selection select_by_key(const CandidatePool& pool, const std::map<ClassId, std::vector<Index>>& groups,
                               const Vector& key, Index e, int origin_task, const Vector& reported) {
  Selection sel;
  for (const auto& [c, rows] : groups) {
    std::vector<Index> order = rows;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) < key(b); });
    const auto take = static_cast<std::size_t>(std::min<Index>(e, static_cast<Index>(order.size())));
    std::vector<char> chosen(static_cast<std::size_t>(pool.size()), 0);
    for (std::size_t k = 0; k < take; ++k) {
      sel.items.push_back(make_item(pool, order[k], origin_task));
      chosen[static_cast<std::size_t>(order[k])] = 1;
    }
    for (Index r : rows)
      sel.trace.push_back(TraceRow{c, pool.source_nodes[static_cast<std::size_t>(r)], reported(r), chosen[static_cast<std::size_t>(r)] != 0});
  }
  return sel;
}

inline void require_positive_e(Index e) {
  if (e < 1) throw Error("selection: e must be >= 1");
}

}  // namespace detail

/// Uniform sample of min(e, |class|) candidates per class.
inline Selection select_random(const CandidatePool& pool, const ClassMask& classes, Index e, std::uint64_t seed,
                               int origin_task) {
  detail::require_positive_e(e);
  const auto groups = detail::rows_by_class(pool, classes);
  Selection sel;
  for (const auto& [c, rows] : groups) {
    std::vector<Index> order = rows;
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::shuffle(order.begin(), order.end(), rng);
    const auto take = static_cast<std::size_t>(std::min<Index>(e, static_cast<Index>(order.size())));
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k < take) sel.items.push_back(detail::make_item(pool, order[k], origin_task));
      sel.trace.push_back(TraceRow{c, pool.source_nodes[static_cast<std::size_t>(order[k])], static_cast<double>(k), k < take});
    }
  }
  return sel;
}

/// Per class, the e candidates whose representation lies closest to the class mean.
/// `representation` rows align with the pool (attributes or embeddings).
inline Selection select_mf(const CandidatePool& pool, const ClassMask& classes, const Matrix& representation, Index e,
                           int origin_task) {
  detail::require_positive_e(e);
  if (representation.rows() != pool.size()) throw DimensionError("select_mf: representation rows != pool size");
  const auto groups = detail::rows_by_class(pool, classes);
  Vector dist(pool.size());
  for (const auto& [c, rows] : groups) {
    Eigen::RowVectorXd prototype = Eigen::RowVectorXd::Zero(representation.cols());
    for (Index r : rows) prototype += representation.row(r);
    prototype /= static_cast<double>(rows.size());
    for (Index r : rows) dist(r) = (representation.row(r) - prototype).norm();
  }
  return detail::select_by_key(pool, groups, dist, e, origin_task, dist);
}

/// Median Euclidean distance over all pairs with different labels; 0 when there are none.
inline double median_cross_class_distance(const Matrix& representation, const std::vector<ClassId>& labels) {
  std::vector<double> d;
  for (Index i = 0; i < representation.rows(); ++i)
    for (Index j = i + 1; j < representation.rows(); ++j)
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)])
        d.push_back((representation.row(i) - representation.row(j)).norm());
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  if (d.size() % 2 == 1) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Per class, the e candidates with the fewest other-class candidates closer than `distance`
/// (nullopt: the median cross-class distance).
inline Selection select_cm(const CandidatePool& pool, const ClassMask& classes, const Matrix& representation, Index e,
                           std::optional<double> distance, int origin_task) {
  detail::require_positive_e(e);
  if (representation.rows() != pool.size()) throw DimensionError("select_cm: representation rows != pool size");
  if (distance && !(*distance > 0)) throw Error("select_cm: distance must be > 0");
  const auto groups = detail::rows_by_class(pool, classes);
  const double d = distance ? *distance : median_cross_class_distance(representation, pool.samples.labels);
  Vector count = Vector::Zero(pool.size());
  for (Index i = 0; i < pool.size(); ++i)
    for (Index j = i + 1; j < pool.size(); ++j) {
      if (pool.samples.labels[static_cast<std::size_t>(i)] == pool.samples.labels[static_cast<std::size_t>(j)]) continue;
      if ((representation.row(i) - representation.row(j)).norm() < d) {
        count(i) += 1;
        count(j) += 1;
      }
    }
  return detail::select_by_key(pool, groups, count, e, origin_task, count);
}

// ---------------------------------------------------------------------------
// Influence functions
// ---------------------------------------------------------------------------

struct InfluenceResult {
  /// score_i = -<H^-1 g_probe, grad L(candidate_i)>, summed over probes.
  Vector scores;
  Vector probe_gradient;
  Vector solution;
  CgResult cg;
};

/// Gradient of one candidate's unit-weight loss.
template <DifferentiableModel M>
Vector sample_gradient(const M& model, const SampleSet& samples, Index row, const ClassMask& mask) {
  const Index rows[] = {row};
  const SampleSet one = samples.subset(rows).with_weights(1.0);
  return gradient(model, one, mask);
}

/// H^-1 g with H the (damped) mean Hessian of `training` at the model's parameters.
template <DifferentiableModel M>
CgResult inverse_hvp(const M& model, const Objective& training, const Vector& g, const CgSettings& settings) {
  return cg_solve([&](const Vector& v) { return model.objective_hvp(training, v, 0.0); }, g, settings);
}

/// Influence of up-weighting each candidate on the summed probe loss.
/// One CG solve is shared by all candidates.
template <DifferentiableModel M>
InfluenceResult influence_scores(const M& model, const Objective& training, const SampleSet& candidates,
                                 const ClassMask& candidate_mask, const SampleSet& probes, const ClassMask& probe_mask,
                                 const CgSettings& settings) {
  if (probes.empty()) throw Error("influence_scores: probe set is empty");
  InfluenceResult res;
  res.probe_gradient = gradient(model, probes, probe_mask);
  res.cg = inverse_hvp(model, training, res.probe_gradient, settings);
  res.solution = res.cg.solution;
  res.scores.resize(candidates.size());
  for (Index i = 0; i < candidates.size(); ++i)
    res.scores(i) = -res.solution.dot(sample_gradient(model, candidates, i, candidate_mask));
  return res;
}

/// d theta / d epsilon for up-weighting one sample: -H^-1 grad L(sample).
template <DifferentiableModel M>
Vector parameter_influence(const M& model, const Objective& training, const SampleSet& samples, Index row,
                           const ClassMask& mask, const CgSettings& settings) {
  return -inverse_hvp(model, training, sample_gradient(model, samples, row, mask), settings).solution;
}

/// Per class, the e candidates with the largest influence (|score| by default).
template <DifferentiableModel M>
Selection select_im(const M& model, const Objective& training, const CandidatePool& pool, const ClassMask& classes,
                    const ClassMask& candidate_mask, const SampleSet& probes, const ClassMask& probe_mask, Index e,
                    const CgSettings& settings, InfluenceRanking ranking, int origin_task,
                    CgResult* cg_report = nullptr) {
  detail::require_positive_e(e);
  const auto groups = detail::rows_by_class(pool, classes);
  const InfluenceResult inf = influence_scores(model, training, pool.samples, candidate_mask, probes, probe_mask, settings);
  if (cg_report) *cg_report = inf.cg;
  const Vector key = ranking == InfluenceRanking::absolute ? Vector(-inf.scores.cwiseAbs()) : Vector(-inf.scores);
  return detail::select_by_key(pool, groups, key, e, origin_task, inf.scores);
}

// ---------------------------------------------------------------------------
// Leave-one-out retraining oracle
// ---------------------------------------------------------------------------

struct ConvergedFitOptions {
  double gradient_tol = 1e-10;
  Index max_iters = 20000;
  Index history = 10;
};

struct ConvergedFitReport {
  Index iterations = 0;
  double gradient_norm = 0.0;
};

/// Minimizes `obj` to stationarity with L-BFGS and Armijo backtracking.
/// Uses gradients only, so it shares no code path with the HVP/CG route.
template <DifferentiableModel M>
ConvergedFitReport fit_to_convergence(M& model, const Objective& obj, const ConvergedFitOptions& opts = {}) {
  Vector x = model.parameters();
  auto [f, g] = model.objective_value_and_gradient(obj);
  std::vector<Vector> s_hist, y_hist;
  std::vector<double> rho_hist;
  ConvergedFitReport rep;
  for (; rep.iterations < opts.max_iters; ++rep.iterations) {
    rep.gradient_norm = g.norm();
    if (!std::isfinite(f) || !std::isfinite(rep.gradient_norm)) throw DivergenceError("fit_to_convergence: non-finite objective");
    if (rep.gradient_norm <= opts.gradient_tol) break;

    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Vector dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / rep.gradient_norm) : 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    Vector g_new;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      model.set_parameters(x_new);
      std::tie(f_new, g_new) = model.objective_value_and_gradient(obj);
      // f_new == f passes Armijo once the decrease underflows; require real progress
      const bool progress = f_new < f || g_new.norm() < rep.gradient_norm;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope && progress) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable decrease left; accept the current point.
      model.set_parameters(x);
      break;
    }
    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<Index>(s_hist.size()) > opts.history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
  }
  model.set_parameters(x);
  rep.gradient_norm = g.norm();
  return rep;
}

struct LooResult {
  /// probe loss after retraining without the sample minus probe loss of full training
  double probe_loss_change = 0.0;
  /// theta_without - theta_full
  Vector parameter_change;
};

/// Ground truth for influence estimates: retrains from `initial` with and
/// without sample `index` and compares the summed probe loss.
template <DifferentiableModel M>
LooResult loo_retrain_oracle(const M& initial, const SampleSet& train, const ClassMask& mask, double weight_decay,
                             const SampleSet& probes, const ClassMask& probe_mask, Index index,
                             const ConvergedFitOptions& opts = {}) {
  if (train.size() > 200) throw Error("loo_retrain_oracle: meant for small instances (<= 200 samples)");
  if (index < 0 || index >= train.size()) throw Error("loo_retrain_oracle: index out of range");
  M full = initial;
  fit_to_convergence(full, single_term(train, mask, weight_decay), opts);

  std::vector<Index> keep;
  for (Index i = 0; i < train.size(); ++i)
    if (i != index) keep.push_back(i);
  const SampleSet reduced = train.subset(keep);
  M without = initial;
  fit_to_convergence(without, single_term(reduced, mask, weight_decay), opts);

  LooResult res;
  res.probe_loss_change = loss(without, probes, probe_mask) - loss(full, probes, probe_mask);
  res.parameter_change = without.parameters() - full.parameters();
  return res;
}

}  // namespace replaygraph
