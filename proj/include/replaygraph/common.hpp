#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace replaygraph {

using Index = Eigen::Index;
using ClassId = int;

/// Dense row-major matrix; one sample (or node) per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when an optimizer or solver produces a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Sorted, duplicate-free set of global class ids.
class ClassMask {
 public:
  ClassMask() = default;
  ClassMask(std::initializer_list<ClassId> ids) : ClassMask(std::vector<ClassId>(ids)) {}
  explicit ClassMask(std::vector<ClassId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  static ClassMask range(ClassId count) {
    std::vector<ClassId> ids(static_cast<std::size_t>(count));
    for (ClassId c = 0; c < count; ++c) ids[static_cast<std::size_t>(c)] = c;
    return ClassMask(std::move(ids));
  }

  [[nodiscard]] bool contains(ClassId c) const { return std::binary_search(ids_.begin(), ids_.end(), c); }

  /// Position of `c` inside the mask, if present.
  [[nodiscard]] std::optional<Index> position(ClassId c) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), c);
    if (it == ids_.end() || *it != c) return std::nullopt;
    return static_cast<Index>(it - ids_.begin());
  }

  [[nodiscard]] ClassMask merged(const ClassMask& other) const {
    std::vector<ClassId> all = ids_;
    all.insert(all.end(), other.ids_.begin(), other.ids_.end());
    return ClassMask(std::move(all));
  }

  [[nodiscard]] Index size() const { return static_cast<Index>(ids_.size()); }
  [[nodiscard]] bool empty() const { return ids_.empty(); }
  [[nodiscard]] ClassId operator[](Index i) const { return ids_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<ClassId>& ids() const { return ids_; }
  [[nodiscard]] ClassId max() const { return ids_.empty() ? -1 : ids_.back(); }

  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }

  friend bool operator==(const ClassMask&, const ClassMask&) = default;

 private:
  std::vector<ClassId> ids_;
};

struct Sample {
  Vector input;
  ClassId label = 0;
  double weight = 1.0;
};

/// Row-stacked samples: inputs(i, :) is the i-th input vector.
struct SampleSet {
  Matrix inputs;
  std::vector<ClassId> labels;
  Vector weights;

  SampleSet() = default;
  SampleSet(Matrix x, std::vector<ClassId> y) : inputs(std::move(x)), labels(std::move(y)) {
    weights = Vector::Ones(inputs.rows());
    check();
  }
  SampleSet(Matrix x, std::vector<ClassId> y, Vector w)
      : inputs(std::move(x)), labels(std::move(y)), weights(std::move(w)) {
    check();
  }

  [[nodiscard]] Index size() const { return inputs.rows(); }
  [[nodiscard]] Index dim() const { return inputs.cols(); }
  [[nodiscard]] bool empty() const { return inputs.rows() == 0; }

  [[nodiscard]] Sample sample(Index i) const {
    return Sample{inputs.row(i).transpose(), labels[static_cast<std::size_t>(i)], weights(i)};
  }

  void push_back(const Sample& s) {
    if (size() > 0 && s.input.size() != dim()) throw DimensionError("sample input dimension mismatch");
    const Index n = size();
    Matrix grown(n + 1, s.input.size());
    if (n > 0) grown.topRows(n) = inputs;
    grown.row(n) = s.input.transpose();
    inputs = std::move(grown);
    labels.push_back(s.label);
    Vector w(n + 1);
    if (n > 0) w.head(n) = weights;
    w(n) = s.weight;
    weights = std::move(w);
  }

  [[nodiscard]] SampleSet subset(std::span<const Index> rows) const {
    Matrix x(static_cast<Index>(rows.size()), dim());
    std::vector<ClassId> y;
    Vector w(static_cast<Index>(rows.size()));
    y.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      x.row(static_cast<Index>(k)) = inputs.row(rows[k]);
      y.push_back(labels[static_cast<std::size_t>(rows[k])]);
      w(static_cast<Index>(k)) = weights(rows[k]);
    }
    return SampleSet(std::move(x), std::move(y), std::move(w));
  }

  [[nodiscard]] SampleSet with_weights(double w) const {
    return SampleSet(inputs, labels, Vector::Constant(size(), w));
  }

  static SampleSet concat(const SampleSet& a, const SampleSet& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dim() != b.dim()) throw DimensionError("cannot concatenate sample sets of different dimension");
    Matrix x(a.size() + b.size(), a.dim());
    x << a.inputs, b.inputs;
    std::vector<ClassId> y = a.labels;
    y.insert(y.end(), b.labels.begin(), b.labels.end());
    Vector w(a.size() + b.size());
    w << a.weights, b.weights;
    return SampleSet(std::move(x), std::move(y), std::move(w));
  }

 private:
  void check() const {
    if (static_cast<Index>(labels.size()) != inputs.rows() || weights.size() != inputs.rows())
      throw DimensionError("sample set: inputs, labels and weights disagree in length");
  }
};

/// scale * sum_i w_i * CE(x_i, y_i) with the softmax restricted to `mask`.
struct LossTerm {
  std::reference_wrapper<const SampleSet> samples;
  ClassMask mask;
  double scale = 1.0;
};

/// Sum of loss terms plus weight_decay * |theta|^2 / 2.
struct Objective {
  std::vector<LossTerm> terms;
  double weight_decay = 0.0;

  /// Number of samples entering the mean Hessian.
  [[nodiscard]] Index sample_count() const {
    Index n = 0;
    for (const auto& t : terms) n += t.samples.get().size();
    return n;
  }
};

inline Objective single_term(const SampleSet& samples, ClassMask mask, double weight_decay = 0.0) {
  Objective obj;
  obj.terms.push_back(LossTerm{std::cref(samples), std::move(mask), 1.0});
  obj.weight_decay = weight_decay;
  return obj;
}

/// Throws if any label of `samples` falls outside `mask`.
inline void require_labels_in(const SampleSet& samples, const ClassMask& mask) {
  for (ClassId y : samples.labels)
    if (!mask.contains(y)) throw Error("label " + std::to_string(y) + " outside the loss mask");
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace replaygraph
