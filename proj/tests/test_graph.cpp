#include "replaygraph/data_io.hpp"
#include "replaygraph/graph.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace replaygraph;

namespace {

Graph path3() { return make_graph(3, {{0, 1}, {1, 2}}, Matrix::Identity(3, 3), {0, 1, 0}, 2); }

Graph complete(Index n, Matrix x) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  return make_graph(n, edges, std::move(x), std::vector<ClassId>(static_cast<std::size_t>(n), 0), 1);
}

Graph random_graph(Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> nd;
  std::vector<std::pair<Index, Index>> edges;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  Matrix x(n, 3);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  std::vector<ClassId> y;
  for (Index u = 0; u < n; ++u) y.push_back(static_cast<ClassId>(u % 3));
  return make_graph(n, edges, std::move(x), std::move(y), 3);
}

}  // namespace

TEST(Graph, MakeGraphSymmetrizesAndDropsDuplicates) {
  const Graph g = make_graph(3, {{0, 1}, {1, 0}, {1, 1}, {2, 1}}, Matrix::Zero(3, 1), {0, 0, 0}, 1);
  EXPECT_EQ(g.num_edges(), 2);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_FALSE(g.has_edge(1, 1));
  EXPECT_EQ(g.csr_offsets.back(), static_cast<Index>(g.csr_neighbors.size()));
}

TEST(Graph, ValidateRejectsBrokenInvariants) {
  Graph g = path3();
  g.labels[0] = 5;
  EXPECT_THROW(g.validate(), Error);
  g = path3();
  g.csr_neighbors[0] = 2;  // 0->2 without 2->0
  EXPECT_THROW(g.validate(), Error);
  EXPECT_THROW(make_graph(2, {{0, 2}}, Matrix::Zero(2, 1), {0, 0}, 1), Error);
}

TEST(NormalizeAdjacency, SingleNode) {
  const Graph g = make_graph(1, {}, Matrix::Ones(1, 1), {0}, 1);
  const Matrix s = normalize_adjacency(g).matrix.to_dense();
  ASSERT_EQ(s.rows(), 1);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(NormalizeAdjacency, TwoNodes) {
  const Graph g = make_graph(2, {{0, 1}}, Matrix::Ones(2, 1), {0, 0}, 1);
  const Matrix s = normalize_adjacency(g).matrix.to_dense();
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(s(i, j), 0.5);
}

TEST(NormalizeAdjacency, PathEntry) {
  const auto s = normalize_adjacency(path3()).matrix;
  EXPECT_NEAR(s.at(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(s.at(0, 1), 0.40825, 1e-5);
  EXPECT_EQ(s.at(0, 2), 0.0);
  EXPECT_NEAR(s.at(1, 1), 1.0 / 3.0, 1e-15);
}

TEST(NormalizeAdjacency, EntriesMatchDegreesAndSymmetry) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(20, 0.2, rng);
    const Matrix s = normalize_adjacency(g).matrix.to_dense();
    for (Index u = 0; u < g.num_nodes; ++u) {
      EXPECT_GT(s(u, u), 0.0);
      for (Index v = 0; v < g.num_nodes; ++v) {
        EXPECT_NEAR(s(u, v), s(v, u), 1e-12);
        if (u == v || g.has_edge(u, v)) {
          const double du = static_cast<double>(g.degree(u) + 1);
          const double dv = static_cast<double>(g.degree(v) + 1);
          EXPECT_NEAR(s(u, v), 1.0 / std::sqrt(du * dv), 1e-15);
        } else {
          EXPECT_EQ(s(u, v), 0.0);
        }
      }
    }
  }
}

TEST(NormalizeAdjacency, SpectralRadiusAtMostOne) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(20, 0.25, rng);
    const Matrix s = normalize_adjacency(g).matrix.to_dense();
    // Power iteration on S^2 (positive semidefinite) bounds |lambda|^2.
    const Matrix s2 = s * s;
    Vector v(20);
    for (Index i = 0; i < 20; ++i) v(i) = nd(rng);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
      Vector w = s2 * v;
      lambda = w.norm();
      v = w / lambda;
    }
    EXPECT_LE(std::sqrt(lambda), 1.0 + 1e-6);
  }
}

TEST(Propagate, ZeroStepsIsIdentity) {
  const Graph g = path3();
  const Matrix x = (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished();
  const auto out = propagate(normalize_adjacency(g), x, 0);
  EXPECT_EQ(out.values, x);
  EXPECT_EQ(out.depth, 0);
}

TEST(Propagate, TwoNodeAveraging) {
  const Graph g = make_graph(2, {{0, 1}}, (Matrix(2, 1) << 0, 2).finished(), {0, 0}, 1);
  const auto out = propagate(normalize_adjacency(g), g.features, 1);
  EXPECT_DOUBLE_EQ(out.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.values(1, 0), 1.0);
}

TEST(Propagate, CompleteGraphIsIdempotent) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Matrix x(6, 4);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const Graph g = complete(6, x);
  const auto s = normalize_adjacency(g);
  const Matrix one = propagate(s, x, 1).values;
  const Matrix two = propagate(s, x, 2).values;
  EXPECT_LT((one - two).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, SplitsAdditively) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(20, 0.2, rng);
    const auto s = normalize_adjacency(g);
    const Index a = trial % 3, b = 1 + trial % 2;
    const Matrix direct = propagate(s, g.features, a + b).values;
    const Matrix staged = propagate(s, propagate(s, g.features, a).values, b).values;
    EXPECT_LT((direct - staged).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Propagate, MatchesDensePower) {
  std::mt19937_64 rng(21);
  const Graph g = random_graph(15, 0.3, rng);
  const auto s = normalize_adjacency(g);
  const Matrix dense = s.matrix.to_dense();
  const Matrix expected = dense * dense * g.features;
  EXPECT_LT((propagate(s, g.features, 2).values - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, Errors) {
  const auto s = normalize_adjacency(path3());
  EXPECT_THROW(propagate(s, Matrix::Zero(2, 1), 1), DimensionError);
  EXPECT_THROW(propagate(s, Matrix::Zero(3, 1), -1), Error);
}

TEST(InducedSubgraph, AllNodesIsIsomorphic) {
  std::mt19937_64 rng(2);
  const Graph g = random_graph(12, 0.3, rng);
  std::vector<Index> all(12);
  std::iota(all.begin(), all.end(), Index{0});
  const auto sub = induced_subgraph(g, all);
  EXPECT_EQ(sub.graph.csr_offsets, g.csr_offsets);
  EXPECT_EQ(sub.graph.csr_neighbors, g.csr_neighbors);
  EXPECT_EQ(sub.graph.features, g.features);
  EXPECT_EQ(sub.graph.labels, g.labels);
}

TEST(InducedSubgraph, SingleNode) {
  const std::vector<Index> one{1};
  const auto sub = induced_subgraph(path3(), one);
  EXPECT_EQ(sub.graph.num_nodes, 1);
  EXPECT_EQ(sub.graph.num_edges(), 0);
  EXPECT_EQ(sub.original_index, std::vector<Index>{1});
}

TEST(InducedSubgraph, PathEndpoints) {
  const std::vector<Index> keep{0, 2};
  const auto sub = induced_subgraph(path3(), keep);
  EXPECT_EQ(sub.graph.num_nodes, 2);
  EXPECT_EQ(sub.graph.num_edges(), 0);
  EXPECT_EQ(sub.new_index, (std::vector<Index>{0, -1, 1}));
}

TEST(InducedSubgraph, EmptyThrows) {
  EXPECT_THROW(induced_subgraph(path3(), std::vector<Index>{}), Error);
}

TEST(InducedSubgraph, PreservesSymmetryAndLabels) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const Graph g = random_graph(25, 0.2, rng);
    std::vector<Index> nodes;
    std::bernoulli_distribution keep(0.5);
    for (Index u = 0; u < g.num_nodes; ++u)
      if (keep(rng)) nodes.push_back(u);
    if (nodes.empty()) nodes.push_back(0);
    const auto sub = induced_subgraph(g, nodes);
    EXPECT_NO_THROW(sub.graph.validate());
    for (Index i = 0; i < sub.graph.num_nodes; ++i) {
      const Index u = sub.original_index[static_cast<std::size_t>(i)];
      EXPECT_EQ(sub.graph.labels[static_cast<std::size_t>(i)], g.labels[static_cast<std::size_t>(u)]);
      for (Index j = 0; j < sub.graph.num_nodes; ++j)
        EXPECT_EQ(sub.graph.has_edge(i, j), g.has_edge(u, sub.original_index[static_cast<std::size_t>(j)]));
    }
  }
}
