#pragma once

#include "replaygraph/model.hpp"

#include <cmath>
#include <random>

namespace replaygraph {

enum class HiddenActivation { relu, identity };

/// Fully connected classifier with manual backpropagation.
///
/// layer_sizes = {input, hidden..., output}. Flat parameter layout is, per
/// layer, the weight matrix (out x in, row-major) followed by its bias. With
/// no hidden layers the layout coincides with LinearModel's.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<Index> layer_sizes, HiddenActivation activation = HiddenActivation::relu)
      : sizes_(std::move(layer_sizes)), activation_(activation) {
    if (sizes_.size() < 2) throw Error("mlp: need at least input and output sizes");
    Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw Error("mlp: layer sizes must be positive");
      offsets_.push_back(total);
      total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    theta_ = Vector::Zero(total);
  }

  /// He-normal weights (std sqrt(2 / fan_in)), zero biases.
  static MlpModel he_init(std::vector<Index> layer_sizes, std::uint64_t seed,
                          HiddenActivation activation = HiddenActivation::relu) {
    MlpModel m(std::move(layer_sizes), activation);
    std::mt19937_64 rng(seed);
    for (Index l = 0; l < m.layer_count(); ++l) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(m.sizes_[static_cast<std::size_t>(l)])));
      auto w = m.layer_weights(l);
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    }
    return m;
  }

  /// 784 -> 256 -> 256 -> 10.
  static MlpModel mnist(std::uint64_t seed) { return he_init({784, 256, 256, 10}, seed); }

  [[nodiscard]] Index layer_count() const { return static_cast<Index>(sizes_.size()) - 1; }
  [[nodiscard]] const std::vector<Index>& layer_sizes() const { return sizes_; }
  [[nodiscard]] HiddenActivation activation() const { return activation_; }
  [[nodiscard]] Index input_dim() const { return sizes_.front(); }
  [[nodiscard]] Index output_dim() const { return sizes_.back(); }
  [[nodiscard]] Index parameter_count() const { return theta_.size(); }

  [[nodiscard]] const Vector& parameters() const { return theta_; }
  void set_parameters(const Vector& theta) {
    if (theta.size() != theta_.size()) throw DimensionError("mlp: parameter size mismatch");
    theta_ = theta;
  }

  [[nodiscard]] Eigen::Map<const Matrix> layer_weights(Index l) const {
    return {theta_.data() + offsets_[static_cast<std::size_t>(l)], out_of(l), in_of(l)};
  }
  Eigen::Map<Matrix> layer_weights(Index l) {
    return {theta_.data() + offsets_[static_cast<std::size_t>(l)], out_of(l), in_of(l)};
  }
  [[nodiscard]] auto layer_bias(Index l) const {
    return theta_.segment(offsets_[static_cast<std::size_t>(l)] + out_of(l) * in_of(l), out_of(l));
  }
  auto layer_bias(Index l) {
    return theta_.segment(offsets_[static_cast<std::size_t>(l)] + out_of(l) * in_of(l), out_of(l));
  }

  [[nodiscard]] const ClassMask& active_classes() const { return active_; }
  void activate(const ClassMask& classes) {
    if (!classes.empty() && (classes[0] < 0 || classes.max() >= output_dim()))
      throw Error("mlp: class id outside the output layer");
    active_ = active_.merged(classes);
  }

  [[nodiscard]] Matrix logits(const Matrix& x) const { return forward(x).back(); }

  /// Output of the last hidden layer (the input when there is none).
  [[nodiscard]] Matrix embed(const Matrix& x) const {
    auto acts = forward(x);
    return acts[acts.size() - 2];
  }

  [[nodiscard]] std::pair<double, Vector> objective_value_and_gradient(const Objective& obj) const {
    double value = 0.5 * obj.weight_decay * theta_.squaredNorm();
    Vector grad = obj.weight_decay * theta_;
    for (const auto& term : obj.terms) {
      const SampleSet& s = term.samples.get();
      if (s.empty()) continue;
      const auto acts = forward(s.inputs);
      const MaskedSoftmax sm = masked_softmax(acts.back(), term.mask, s.labels);
      value += term.scale * s.weights.dot(sm.nll);
      Matrix delta = masked_logit_gradient(sm, term.mask, s.weights, term.scale, output_dim());
      for (Index l = layer_count() - 1; l >= 0; --l) {
        const Matrix& a_in = acts[static_cast<std::size_t>(l)];
        const Index off = offsets_[static_cast<std::size_t>(l)];
        Eigen::Map<Matrix> gw(grad.data() + off, out_of(l), in_of(l));
        gw.noalias() += delta.transpose() * a_in;
        grad.segment(off + out_of(l) * in_of(l), out_of(l)) += delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix back = delta * layer_weights(l);
        if (activation_ == HiddenActivation::relu) back.array() *= (a_in.array() > 0.0).cast<double>();
        delta = std::move(back);
      }
    }
    return {value, grad};
  }

  /// Central-difference HVP of the mean objective, plus damping * v.
  [[nodiscard]] Vector objective_hvp(const Objective& obj, const Vector& v, double damping) const {
    if (v.size() != theta_.size()) throw DimensionError("mlp hvp: vector size mismatch");
    if (damping < 0) throw Error("hvp: damping must be non-negative");
    const Index n = obj.sample_count();
    if (n == 0) throw Error("hvp: objective has no samples");
    const double h = 1e-5 * (1.0 + theta_.lpNorm<Eigen::Infinity>()) / (v.lpNorm<Eigen::Infinity>() + 1e-12);
    MlpModel probe = *this;
    probe.theta_ = theta_ + h * v;
    const Vector g_plus = probe.objective_value_and_gradient(obj).second;
    probe.theta_ = theta_ - h * v;
    const Vector g_minus = probe.objective_value_and_gradient(obj).second;
    Vector out = (g_plus - g_minus) / (2.0 * h * static_cast<double>(n));
    if (!out.allFinite()) throw DivergenceError("mlp hvp: non-finite finite-difference product");
    return out + damping * v;
  }

 private:
  [[nodiscard]] Index in_of(Index l) const { return sizes_[static_cast<std::size_t>(l)]; }
  [[nodiscard]] Index out_of(Index l) const { return sizes_[static_cast<std::size_t>(l) + 1]; }

  /// acts[0] = x, acts[l] = activation of layer l, acts.back() = logits.
  [[nodiscard]] std::vector<Matrix> forward(const Matrix& x) const {
    if (x.cols() != input_dim()) throw DimensionError("mlp: input dimension mismatch");
    std::vector<Matrix> acts;
    acts.reserve(sizes_.size());
    acts.push_back(x);
    for (Index l = 0; l < layer_count(); ++l) {
      Matrix z = acts.back() * layer_weights(l).transpose();
      z.rowwise() += layer_bias(l).transpose();
      if (l + 1 < layer_count() && activation_ == HiddenActivation::relu) z = z.cwiseMax(0.0);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  HiddenActivation activation_ = HiddenActivation::relu;
  Vector theta_;
  ClassMask active_;
};

static_assert(DifferentiableModel<MlpModel>);

}  // namespace replaygraph
