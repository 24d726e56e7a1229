#pragma once

#include "replaygraph/model.hpp"

#include <random>

namespace replaygraph {

/// Multiclass softmax regression over (propagated) features.
///
/// Flat parameter layout: weights (class_count x feature_dim, row-major)
/// followed by the bias (class_count).
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(Index class_count, Index feature_dim)
      : classes_(class_count), features_(feature_dim), theta_(Vector::Zero(class_count * feature_dim + class_count)) {}

  /// Weights drawn from N(0, scale^2), zero bias.
  static LinearModel random(Index class_count, Index feature_dim, std::uint64_t seed, double scale = 0.01) {
    LinearModel m(class_count, feature_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    for (Index i = 0; i < class_count * feature_dim; ++i) m.theta_(i) = normal(rng);
    return m;
  }

  [[nodiscard]] Index class_count() const { return classes_; }
  [[nodiscard]] Index input_dim() const { return features_; }
  [[nodiscard]] Index output_dim() const { return classes_; }
  [[nodiscard]] Index parameter_count() const { return theta_.size(); }

  [[nodiscard]] const Vector& parameters() const { return theta_; }
  void set_parameters(const Vector& theta) {
    if (theta.size() != theta_.size()) throw DimensionError("linear model: parameter size mismatch");
    theta_ = theta;
  }

  [[nodiscard]] Eigen::Map<const Matrix> weights() const { return {theta_.data(), classes_, features_}; }
  Eigen::Map<Matrix> weights() { return {theta_.data(), classes_, features_}; }
  [[nodiscard]] auto bias() const { return theta_.tail(classes_); }
  auto bias() { return theta_.tail(classes_); }

  [[nodiscard]] const ClassMask& active_classes() const { return active_; }
  void activate(const ClassMask& classes) {
    if (!classes.empty() && (classes[0] < 0 || classes.max() >= classes_))
      throw Error("linear model: class id outside the output layer");
    active_ = active_.merged(classes);
  }

  [[nodiscard]] Matrix logits(const Matrix& x) const {
    if (x.cols() != features_) throw DimensionError("linear model: input dimension mismatch");
    Matrix z = x * weights().transpose();
    z.rowwise() += bias().transpose();
    return z;
  }

  /// The model has no hidden layer: its embedding is its input.
  [[nodiscard]] Matrix embed(const Matrix& x) const { return x; }

  [[nodiscard]] std::pair<double, Vector> objective_value_and_gradient(const Objective& obj) const {
    double value = 0.5 * obj.weight_decay * theta_.squaredNorm();
    Vector grad = obj.weight_decay * theta_;
    Eigen::Map<Matrix> grad_w(grad.data(), classes_, features_);
    auto grad_b = grad.tail(classes_);
    for (const auto& term : obj.terms) {
      const SampleSet& s = term.samples.get();
      if (s.empty()) continue;
      const MaskedSoftmax sm = masked_softmax(logits(s.inputs), term.mask, s.labels);
      value += term.scale * s.weights.dot(sm.nll);
      const Matrix g = masked_logit_gradient(sm, term.mask, s.weights, term.scale, classes_);
      grad_w.noalias() += g.transpose() * s.inputs;
      grad_b += g.colwise().sum().transpose();
    }
    return {value, grad};
  }

  /// (H + damping I) v with H the Hessian of `obj` divided by its sample count.
  [[nodiscard]] Vector objective_hvp(const Objective& obj, const Vector& v, double damping) const {
    if (v.size() != theta_.size()) throw DimensionError("linear model hvp: vector size mismatch");
    if (damping < 0) throw Error("hvp: damping must be non-negative");
    const Index n = obj.sample_count();
    if (n == 0) throw Error("hvp: objective has no samples");

    Eigen::Map<const Matrix> v_w(v.data(), classes_, features_);
    const auto v_b = v.tail(classes_);
    Vector out = obj.weight_decay * v;
    Eigen::Map<Matrix> out_w(out.data(), classes_, features_);
    auto out_b = out.tail(classes_);

    for (const auto& term : obj.terms) {
      const SampleSet& s = term.samples.get();
      if (s.empty()) continue;
      const ClassMask& mask = term.mask;
      const MaskedSoftmax sm = masked_softmax(logits(s.inputs), mask, s.labels);
      // directional change of the masked logits
      Matrix dz(s.size(), mask.size());
      for (Index k = 0; k < mask.size(); ++k)
        dz.col(k) = s.inputs * v_w.row(mask[k]).transpose() + Vector::Constant(s.size(), v_b(mask[k]));
      // (diag(p) - p p^T) dz per row, weighted
      Matrix r = sm.probs.cwiseProduct(dz);
      const Vector pdz = r.rowwise().sum();
      r -= sm.probs.cwiseProduct(pdz.replicate(1, mask.size()));
      r.array().colwise() *= (term.scale * s.weights).array();
      const Matrix rx = r.transpose() * s.inputs;
      const Vector rb = r.colwise().sum().transpose();
      for (Index k = 0; k < mask.size(); ++k) {
        out_w.row(mask[k]) += rx.row(k);
        out_b(mask[k]) += rb(k);
      }
    }
    out /= static_cast<double>(n);
    return out + damping * v;
  }

 private:
  Index classes_ = 0;
  Index features_ = 0;
  Vector theta_;
  ClassMask active_;
};

static_assert(DifferentiableModel<LinearModel>);

}  // namespace replaygraph
