#pragma once

#include "replaygraph/adam.hpp"
#include "replaygraph/common.hpp"

#include <concepts>
#include <numeric>
#include <random>
#include <utility>

namespace replaygraph {

/// What the replay engine and the selection strategies need from a model.
///
/// All objective_* members evaluate the summed objective described by
/// `Objective`; the HVP is the mean Hessian (divided by the sample count).
template <class M>
concept DifferentiableModel = std::copy_constructible<M> &&
    requires(const M& cm, M& m, const Objective& obj, const Vector& v, const Matrix& x, const ClassMask& mask) {
      { cm.parameters() } -> std::convertible_to<Vector>;
      { m.set_parameters(v) };
      { cm.parameter_count() } -> std::convertible_to<Index>;
      { cm.input_dim() } -> std::convertible_to<Index>;
      { cm.output_dim() } -> std::convertible_to<Index>;
      { cm.logits(x) } -> std::convertible_to<Matrix>;
      { cm.embed(x) } -> std::convertible_to<Matrix>;
      { cm.objective_value_and_gradient(obj) } -> std::convertible_to<std::pair<double, Vector>>;
      { cm.objective_hvp(obj, v, 0.0) } -> std::convertible_to<Vector>;
      { cm.active_classes() } -> std::convertible_to<ClassMask>;
      { m.activate(mask) };
    };

/// Row-wise softmax over the mask columns of full logits.
struct MaskedSoftmax {
  Matrix probs;     ///< n x |mask|
  Vector nll;       ///< -log p(label) per row
  std::vector<Index> label_pos;
};

inline MaskedSoftmax masked_softmax(const Matrix& logits, const ClassMask& mask, const std::vector<ClassId>& labels) {
  const Index n = logits.rows();
  if (n > 0 && mask.empty()) throw Error("loss mask is empty");
  MaskedSoftmax out;
  out.probs.resize(n, mask.size());
  out.nll.resize(n);
  out.label_pos.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto pos = mask.position(labels[static_cast<std::size_t>(i)]);
    if (!pos) throw Error("label " + std::to_string(labels[static_cast<std::size_t>(i)]) + " outside the loss mask");
    out.label_pos[static_cast<std::size_t>(i)] = *pos;
    double zmax = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < mask.size(); ++k) zmax = std::max(zmax, logits(i, mask[k]));
    double denom = 0.0;
    for (Index k = 0; k < mask.size(); ++k) {
      const double e = std::exp(logits(i, mask[k]) - zmax);
      out.probs(i, k) = e;
      denom += e;
    }
    out.probs.row(i) /= denom;
    out.nll(i) = -(logits(i, mask[*pos]) - zmax - std::log(denom));
  }
  return out;
}

/// d(sum_i scale*w_i*nll_i)/d(logits), scattered back into all output columns.
inline Matrix masked_logit_gradient(const MaskedSoftmax& sm, const ClassMask& mask, const Vector& sample_weights,
                                    double scale, Index output_dim) {
  Matrix g = Matrix::Zero(sm.probs.rows(), output_dim);
  for (Index i = 0; i < sm.probs.rows(); ++i) {
    const double w = scale * sample_weights(i);
    for (Index k = 0; k < mask.size(); ++k) g(i, mask[k]) = w * sm.probs(i, k);
    g(i, mask[sm.label_pos[static_cast<std::size_t>(i)]]) -= w;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Free-function surface over a single weighted sample set.
// ---------------------------------------------------------------------------

template <DifferentiableModel M>
double loss(const M& model, const SampleSet& samples, const ClassMask& mask, double weight_decay = 0.0) {
  if (samples.empty()) throw Error("loss: no samples");
  return model.objective_value_and_gradient(single_term(samples, mask, weight_decay)).first;
}

template <DifferentiableModel M>
Vector gradient(const M& model, const SampleSet& samples, const ClassMask& mask, double weight_decay = 0.0) {
  if (samples.empty()) throw Error("gradient: no samples");
  return model.objective_value_and_gradient(single_term(samples, mask, weight_decay)).second;
}

template <DifferentiableModel M>
Vector hvp(const M& model, const SampleSet& samples, const ClassMask& mask, const Vector& v, double damping,
           double weight_decay = 0.0) {
  return model.objective_hvp(single_term(samples, mask, weight_decay), v, damping);
}

/// Argmax over the mask's logits; ties go to the lowest class id.
template <DifferentiableModel M>
std::vector<ClassId> predict(const M& model, const Matrix& inputs, const ClassMask& mask) {
  if (mask.empty()) throw Error("predict: empty class mask");
  const Matrix z = model.logits(inputs);
  std::vector<ClassId> out(static_cast<std::size_t>(inputs.rows()));
  for (Index i = 0; i < inputs.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < mask.size(); ++k)
      if (z(i, mask[k]) > z(i, mask[best])) best = k;
    out[static_cast<std::size_t>(i)] = mask[best];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam training
// ---------------------------------------------------------------------------

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// Objective before each step (full batch) or summed batch losses (mini-batch).
  std::vector<double> epoch_losses;
};

namespace detail {

inline Objective batch_objective(const Objective& obj, const std::vector<SampleSet>& parts) {
  Objective b;
  b.weight_decay = obj.weight_decay;
  for (std::size_t t = 0; t < obj.terms.size(); ++t)
    if (!parts[t].empty()) b.terms.push_back(LossTerm{std::cref(parts[t]), obj.terms[t].mask, obj.terms[t].scale});
  return b;
}

inline void check_finite_loss(double value, Index epoch) {
  if (!std::isfinite(value))
    throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": objective = " + std::to_string(value));
}

}  // namespace detail

/// Minimizes `obj` with Adam for `cfg.epochs` epochs, full batch when
/// cfg.batch_size is 0, otherwise seeded-shuffle mini-batches.
template <DifferentiableModel M>
TrainReport fit(M& model, const Objective& obj, const TrainConfig& cfg) {
  TrainReport report;
  if (obj.sample_count() == 0) throw Error("fit: objective has no samples");
  AdamState adam(model.parameter_count(), cfg.adam);
  Vector theta = model.parameters();
  report.initial_loss = model.objective_value_and_gradient(obj).first;
  detail::check_finite_loss(report.initial_loss, 0);

  if (cfg.batch_size <= 0 || cfg.batch_size >= obj.sample_count()) {
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
      auto [value, grad] = model.objective_value_and_gradient(obj);
      detail::check_finite_loss(value, epoch);
      report.epoch_losses.push_back(value);
      adam.apply(theta, grad);
      if (!theta.allFinite()) throw DivergenceError("training produced non-finite parameters at epoch " + std::to_string(epoch));
      model.set_parameters(theta);
    }
  } else {
    std::vector<std::pair<std::size_t, Index>> rows;
    for (std::size_t t = 0; t < obj.terms.size(); ++t)
      for (Index i = 0; i < obj.terms[t].samples.get().size(); ++i) rows.emplace_back(t, i);
    std::mt19937_64 rng(cfg.seed);
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(rows.begin(), rows.end(), rng);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(rows.size(), start + static_cast<std::size_t>(cfg.batch_size));
        std::vector<std::vector<Index>> picked(obj.terms.size());
        for (std::size_t r = start; r < stop; ++r) picked[rows[r].first].push_back(rows[r].second);
        std::vector<SampleSet> parts;
        parts.reserve(obj.terms.size());
        for (std::size_t t = 0; t < obj.terms.size(); ++t) {
          std::sort(picked[t].begin(), picked[t].end());
          parts.push_back(obj.terms[t].samples.get().subset(picked[t]));
        }
        auto [value, grad] = model.objective_value_and_gradient(detail::batch_objective(obj, parts));
        detail::check_finite_loss(value, epoch);
        epoch_loss += value;
        adam.apply(theta, grad);
        if (!theta.allFinite()) throw DivergenceError("training produced non-finite parameters at epoch " + std::to_string(epoch));
        model.set_parameters(theta);
      }
      report.epoch_losses.push_back(epoch_loss);
    }
  }
  report.final_loss = model.objective_value_and_gradient(obj).first;
  detail::check_finite_loss(report.final_loss, cfg.epochs);
  return report;
}

}  // namespace replaygraph
