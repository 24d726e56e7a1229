#pragma once

#include "replaygraph/common.hpp"

#include <cmath>

namespace replaygraph {

struct AdamOptions {
  double lr = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for one flat parameter vector.
struct AdamState {
  AdamOptions options;
  Vector first_moment;
  Vector second_moment;
  long step = 0;

  AdamState() = default;
  AdamState(Index parameter_count, AdamOptions opts)
      : options(opts), first_moment(Vector::Zero(parameter_count)), second_moment(Vector::Zero(parameter_count)) {}

  /// One bias-corrected update of `params` along `grad`.
  void apply(Vector& params, const Vector& grad) {
    if (grad.size() != params.size() || first_moment.size() != params.size())
      throw DimensionError("adam: gradient/parameter size mismatch");
    ++step;
    first_moment = options.beta1 * first_moment + (1.0 - options.beta1) * grad;
    second_moment = options.beta2 * second_moment + (1.0 - options.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
    params.array() -= options.lr * (first_moment.array() / c1) /
                      ((second_moment.array() / c2).sqrt() + options.epsilon);
  }
};

struct TrainConfig {
  Index epochs = 100;
  AdamOptions adam{};
  /// 0 means full batch.
  Index batch_size = 0;
  std::uint64_t seed = 0;
};

}  // namespace replaygraph
