#include "oracles.hpp"
#include "replaygraph/linear_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace replaygraph;
namespace o = replaygraph::oracle;

namespace {

struct Instance {
  LinearModel model;
  SampleSet samples;
  ClassMask mask;
  double decay = 0.0;
};

/// Random model and samples; labels drawn from a random subset of the classes.
Instance random_instance(std::mt19937_64& rng, Index n = 12, Index d = 5, Index c = 4) {
  Instance in;
  in.model = LinearModel(c, d);
  in.model.set_parameters(o::random_vector(c * d + c, rng, 0.7));
  std::vector<ClassId> ids;
  for (ClassId k = 0; k < c; ++k)
    if (k < 2 || rng() % 2) ids.push_back(k);
  in.mask = ClassMask(ids);
  std::vector<ClassId> y;
  for (Index i = 0; i < n; ++i) y.push_back(in.mask[static_cast<Index>(rng() % static_cast<std::uint64_t>(in.mask.size()))]);
  in.samples = SampleSet(o::random_matrix(n, d, rng), y);
  std::uniform_real_distribution<double> w(0.2, 2.0);
  for (Index i = 0; i < n; ++i) in.samples.weights(i) = w(rng);
  in.decay = (rng() % 2) ? 0.0 : 0.05;
  return in;
}

SampleSet one_sample(Vector x, ClassId y) {
  Matrix m(1, x.size());
  m.row(0) = x.transpose();
  return SampleSet(m, {y});
}

}  // namespace

TEST(LinearLoss, UniformSoftmax) {
  const LinearModel m(2, 3);
  const SampleSet s = one_sample(Vector::Ones(3), 0);
  EXPECT_NEAR(loss(m, s, ClassMask::range(2)), std::log(2.0), 1e-15);
  const SampleSet two = SampleSet::concat(s, s);
  EXPECT_NEAR(loss(m, two, ClassMask::range(2)), 2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(m, s.with_weights(0.5), ClassMask::range(2)), 0.5 * std::log(2.0), 1e-15);
}

TEST(LinearLoss, LabelOutsideMaskThrows) {
  const LinearModel m(3, 2);
  EXPECT_THROW(loss(m, one_sample(Vector::Ones(2), 2), ClassMask({0, 1})), Error);
  EXPECT_THROW(loss(m, SampleSet(), ClassMask({0, 1})), Error);
}

TEST(LinearGradient, ClosedFormExample) {
  const LinearModel m(2, 2);
  const Vector g = gradient(m, one_sample((Vector(2) << 1, 0).finished(), 0), ClassMask::range(2));
  EXPECT_DOUBLE_EQ(g(0), -0.5);
  EXPECT_DOUBLE_EQ(g(1), 0.0);
  EXPECT_DOUBLE_EQ(g(2), 0.5);
  EXPECT_DOUBLE_EQ(g(4), -0.5);  // bias of class 0
}

TEST(LinearGradient, MaskedOutBlockIsPureDecay) {
  std::mt19937_64 rng(1);
  LinearModel m(4, 3);
  m.set_parameters(o::random_vector(m.parameter_count(), rng));
  SampleSet s(o::random_matrix(6, 3, rng), {0, 1, 0, 1, 1, 0});
  const double decay = 0.3;
  const Vector g = gradient(m, s, ClassMask({0, 1}), decay);
  for (ClassId c : {2, 3}) {
    for (Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g(c * 3 + j), decay * m.parameters()(c * 3 + j));
    EXPECT_DOUBLE_EQ(g(12 + c), decay * m.parameters()(12 + c));
  }
}

TEST(LinearGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    const Objective obj = single_term(in.samples, in.mask, in.decay);
    const Vector g = in.model.objective_value_and_gradient(obj).second;
    worst = std::max(worst, o::relative_error(g, o::fd_gradient(in.model, obj)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(LinearHvp, ZeroVector) {
  std::mt19937_64 rng(3);
  const Instance in = random_instance(rng);
  const Vector z = Vector::Zero(in.model.parameter_count());
  EXPECT_TRUE(hvp(in.model, in.samples, in.mask, z, 0.5, in.decay).isZero(0.0));
}

TEST(LinearHvp, SymmetricAndMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    const Objective obj = single_term(in.samples, in.mask, in.decay);
    const Vector u = o::random_vector(in.model.parameter_count(), rng);
    const Vector v = o::random_vector(in.model.parameter_count(), rng);
    const Vector hv = in.model.objective_hvp(obj, v, 0.0);
    const Vector hu = in.model.objective_hvp(obj, u, 0.0);
    EXPECT_NEAR(u.dot(hv), v.dot(hu), 1e-10 * std::max(1.0, std::abs(u.dot(hv))));
    EXPECT_LT(o::relative_error(hv, o::fd_hvp(in.model, obj, v)), 1e-4);
  }
}

TEST(LinearHvp, DampingIsExactlyAdditive) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(rng);
    const Objective obj = single_term(in.samples, in.mask, in.decay);
    const Vector v = o::random_vector(in.model.parameter_count(), rng);
    const double d = 0.01 * static_cast<double>(trial);
    const Vector base = in.model.objective_hvp(obj, v, 0.0);
    EXPECT_EQ(in.model.objective_hvp(obj, v, d), base + d * v);
  }
}

TEST(LinearHvp, MatchesDenseHessianBlocks) {
  // Mean of per-sample (diag(p) - p p^T) kron [x;1][x;1]^T, assembled densely.
  std::mt19937_64 rng(9);
  const Instance in = random_instance(rng, 7, 3, 3);
  const Index c = 3, d = 3, p = c * d + c;
  Matrix h = Matrix::Zero(p, p);
  const Matrix z = in.model.logits(in.samples.inputs);
  for (Index i = 0; i < in.samples.size(); ++i) {
    Vector prob = Vector::Zero(c);
    double norm = 0.0;
    for (ClassId k : in.mask) norm += std::exp(z(i, k));
    for (ClassId k : in.mask) prob(k) = std::exp(z(i, k)) / norm;
    const Matrix a = Matrix(prob.asDiagonal()) - prob * prob.transpose();
    Vector xa(d + 1);
    xa << in.samples.inputs.row(i).transpose(), 1.0;
    for (Index k = 0; k < c; ++k)
      for (Index l = 0; l < c; ++l)
        for (Index s = 0; s <= d; ++s)
          for (Index t = 0; t <= d; ++t) {
            const Index r = s < d ? k * d + s : c * d + k;
            const Index q = t < d ? l * d + t : c * d + l;
            h(r, q) += in.samples.weights(i) * a(k, l) * xa(s) * xa(t);
          }
  }
  h += in.decay * Matrix::Identity(p, p);
  h /= static_cast<double>(in.samples.size());
  const Vector v = o::random_vector(p, rng);
  EXPECT_LT(o::relative_error(hvp(in.model, in.samples, in.mask, v, 0.0, in.decay), h * v), 1e-12);
}

TEST(LinearHvp, Errors) {
  const LinearModel m(2, 2);
  const SampleSet s = one_sample(Vector::Ones(2), 0);
  EXPECT_THROW(hvp(m, s, ClassMask::range(2), Vector::Zero(3), 0.0), DimensionError);
  EXPECT_THROW(hvp(m, s, ClassMask::range(2), Vector::Zero(6), -1.0), Error);
}

TEST(LinearLoss, ConvexAlongSegments) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = random_instance(rng);
    const Vector t1 = o::random_vector(in.model.parameter_count(), rng, 2.0);
    const Vector t2 = o::random_vector(in.model.parameter_count(), rng, 2.0);
    const double t = unit(rng);
    auto at = [&](const Vector& th) {
      LinearModel m = in.model;
      m.set_parameters(th);
      return loss(m, in.samples, in.mask, in.decay);
    };
    EXPECT_LE(at(t * t1 + (1 - t) * t2), t * at(t1) + (1 - t) * at(t2) + 1e-10);
  }
}

TEST(LinearLoss, SumAdditivity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance a = random_instance(rng, 6);
    SampleSet b(o::random_matrix(5, 5, rng), std::vector<ClassId>(5, a.mask[0]));
    const double whole = loss(a.model, SampleSet::concat(a.samples, b), a.mask);
    EXPECT_NEAR(whole, loss(a.model, a.samples, a.mask) + loss(a.model, b, a.mask), 1e-12 * std::max(1.0, whole));
  }
}

TEST(LinearTrain, SeparableToyReachesFullAccuracy) {
  std::mt19937_64 rng(4);
  const SampleSet s = o::two_blobs(20, 4, 3.0, rng);
  LinearModel m(2, 4);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.adam.lr = 0.2;
  fit(m, single_term(s, ClassMask::range(2), 5e-6), cfg);
  const auto pred = predict(m, s.inputs, ClassMask::range(2));
  EXPECT_EQ(pred, s.labels);
}

TEST(LinearTrain, SingleSampleLossDecreases) {
  LinearModel m(3, 2);
  const SampleSet s = one_sample((Vector(2) << 0.3, -1.2).finished(), 1);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.adam.lr = 0.05;
  const TrainReport r = fit(m, single_term(s, ClassMask::range(3)), cfg);
  ASSERT_EQ(r.epoch_losses.size(), 100u);
  for (std::size_t i = 1; i < r.epoch_losses.size(); ++i) EXPECT_LT(r.epoch_losses[i], r.epoch_losses[i - 1]);
  EXPECT_LT(r.final_loss, r.epoch_losses.back());
  EXPECT_DOUBLE_EQ(r.initial_loss, r.epoch_losses.front());
}

TEST(LinearTrain, ZeroEpochsUnchangedAndDeterministic) {
  std::mt19937_64 rng(5);
  const Instance in = random_instance(rng);
  LinearModel m = in.model;
  TrainConfig cfg;
  cfg.epochs = 0;
  fit(m, single_term(in.samples, in.mask), cfg);
  EXPECT_EQ(m.parameters(), in.model.parameters());

  cfg.epochs = 30;
  LinearModel a = in.model, b = in.model;
  fit(a, single_term(in.samples, in.mask), cfg);
  fit(b, single_term(in.samples, in.mask), cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
}

TEST(LinearTrain, DivergenceIsReported) {
  LinearModel m(2, 1);
  Vector th(4);
  th << 1e308, -1e308, 0, 0;
  m.set_parameters(th);
  TrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_THROW(fit(m, single_term(one_sample(Vector::Constant(1, 10.0), 1), ClassMask::range(2), 1.0), cfg),
               DivergenceError);
}

TEST(Predict, Examples) {
  const LinearModel zero(6, 2);
  const Matrix x = Matrix::Random(5, 2);
  for (ClassId c : predict(zero, x, ClassMask({3, 5}))) EXPECT_EQ(c, 3);
  for (ClassId c : predict(zero, x, ClassMask({4}))) EXPECT_EQ(c, 4);
  LinearModel m(3, 2);
  m.bias()(2) = 100.0;
  for (ClassId c : predict(m, x, ClassMask::range(3))) EXPECT_EQ(c, 2);
  EXPECT_THROW(predict(m, x, ClassMask()), Error);
  EXPECT_THROW(predict(m, Matrix::Zero(1, 3), ClassMask::range(3)), DimensionError);
}

TEST(LinearModel, ActivationAndLayout) {
  LinearModel m(4, 2);
  m.activate(ClassMask({0, 1}));
  m.activate(ClassMask({2}));
  EXPECT_EQ(m.active_classes(), ClassMask({0, 1, 2}));
  EXPECT_THROW(m.activate(ClassMask({4})), Error);
  m.weights()(1, 0) = 2.0;
  EXPECT_EQ(m.parameters()(2), 2.0);
  m.bias()(3) = -1.0;
  EXPECT_EQ(m.parameters()(11), -1.0);
}
