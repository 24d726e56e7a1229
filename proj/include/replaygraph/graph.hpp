#pragma once

#include "replaygraph/common.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>
#include <utility>

namespace replaygraph {

/// Undirected attributed graph in CSR form.
///
/// Neighbor lists are sorted and symmetric; self-loops are not stored (the
/// normalization adds them).
struct Graph {
  Index num_nodes = 0;
  std::vector<Index> csr_offsets{0};
  std::vector<Index> csr_neighbors;
  Matrix features;
  std::vector<ClassId> labels;
  ClassId class_count = 0;

  [[nodiscard]] std::span<const Index> neighbors(Index u) const {
    const auto begin = static_cast<std::size_t>(csr_offsets[static_cast<std::size_t>(u)]);
    const auto end = static_cast<std::size_t>(csr_offsets[static_cast<std::size_t>(u) + 1]);
    return std::span<const Index>(csr_neighbors).subspan(begin, end - begin);
  }

  [[nodiscard]] Index degree(Index u) const { return static_cast<Index>(neighbors(u).size()); }
  [[nodiscard]] Index feature_dim() const { return features.cols(); }
  [[nodiscard]] Index num_edges() const { return static_cast<Index>(csr_neighbors.size()) / 2; }

  [[nodiscard]] bool has_edge(Index u, Index v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  /// Throws Error describing the first violated invariant.
  void validate() const {
    if (static_cast<Index>(csr_offsets.size()) != num_nodes + 1) throw Error("graph: csr_offsets has wrong length");
    if (csr_offsets.front() != 0) throw Error("graph: csr_offsets must start at 0");
    for (std::size_t i = 1; i < csr_offsets.size(); ++i)
      if (csr_offsets[i] < csr_offsets[i - 1]) throw Error("graph: csr_offsets decreasing");
    if (csr_offsets.back() != static_cast<Index>(csr_neighbors.size()))
      throw Error("graph: csr_offsets does not cover csr_neighbors");
    for (Index u = 0; u < num_nodes; ++u)
      for (Index v : neighbors(u)) {
        if (v < 0 || v >= num_nodes) throw Error("graph: neighbor index out of range");
        if (!has_edge(v, u)) throw Error("graph: adjacency is not symmetric");
      }
    if (features.rows() != num_nodes) throw Error("graph: feature rows != num_nodes");
    if (static_cast<Index>(labels.size()) != num_nodes) throw Error("graph: label count != num_nodes");
    for (ClassId y : labels)
      if (y < 0 || y >= class_count) throw Error("graph: label outside [0, class_count)");
  }
};

/// Builds a Graph from an undirected edge list. Edges are symmetrized;
/// duplicates and self-loops are dropped.
inline Graph make_graph(Index num_nodes, const std::vector<std::pair<Index, Index>>& edges, Matrix features,
                        std::vector<ClassId> labels, ClassId class_count) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(num_nodes));
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) throw Error("make_graph: edge endpoint out of range");
    if (u == v) continue;
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  Graph g;
  g.num_nodes = num_nodes;
  g.csr_offsets.assign(1, 0);
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    g.csr_neighbors.insert(g.csr_neighbors.end(), nb.begin(), nb.end());
    g.csr_offsets.push_back(static_cast<Index>(g.csr_neighbors.size()));
  }
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.class_count = class_count;
  g.validate();
  return g;
}

/// Square CSR matrix with real weights.
struct SparseMatrix {
  Index rows = 0;
  std::vector<Index> offsets{0};
  std::vector<Index> columns;
  std::vector<double> values;

  /// Entry (r, c), zero when not stored.
  [[nodiscard]] double at(Index r, Index c) const {
    const auto b = columns.begin() + offsets[static_cast<std::size_t>(r)];
    const auto e = columns.begin() + offsets[static_cast<std::size_t>(r) + 1];
    auto it = std::lower_bound(b, e, c);
    if (it == e || *it != c) return 0.0;
    return values[static_cast<std::size_t>(it - columns.begin())];
  }

  [[nodiscard]] Matrix to_dense() const {
    Matrix d = Matrix::Zero(rows, rows);
    for (Index r = 0; r < rows; ++r)
      for (Index k = offsets[static_cast<std::size_t>(r)]; k < offsets[static_cast<std::size_t>(r) + 1]; ++k)
        d(r, columns[static_cast<std::size_t>(k)]) = values[static_cast<std::size_t>(k)];
    return d;
  }

  /// this * x, row by row in fixed order.
  [[nodiscard]] Matrix multiply(const Matrix& x) const {
    if (x.rows() != rows) throw DimensionError("sparse multiply: row count mismatch");
    Matrix out = Matrix::Zero(rows, x.cols());
    for (Index r = 0; r < rows; ++r)
      for (Index k = offsets[static_cast<std::size_t>(r)]; k < offsets[static_cast<std::size_t>(r) + 1]; ++k)
        out.row(r).noalias() += values[static_cast<std::size_t>(k)] * x.row(columns[static_cast<std::size_t>(k)]);
    return out;
  }
};

/// D^-1/2 (A + I) D^-1/2 with degrees counted on A + I.
struct NormalizedAdjacency {
  SparseMatrix matrix;
  [[nodiscard]] Index num_nodes() const { return matrix.rows; }
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(g.num_nodes));
  for (Index u = 0; u < g.num_nodes; ++u)
    inv_sqrt_deg[static_cast<std::size_t>(u)] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));

  NormalizedAdjacency s;
  auto& m = s.matrix;
  m.rows = g.num_nodes;
  m.offsets.assign(1, 0);
  m.columns.reserve(g.csr_neighbors.size() + static_cast<std::size_t>(g.num_nodes));
  m.values.reserve(m.columns.capacity());
  for (Index u = 0; u < g.num_nodes; ++u) {
    const double du = inv_sqrt_deg[static_cast<std::size_t>(u)];
    bool self_done = false;
    auto emit = [&](Index v) {
      m.columns.push_back(v);
      m.values.push_back(du * inv_sqrt_deg[static_cast<std::size_t>(v)]);
    };
    for (Index v : g.neighbors(u)) {
      if (!self_done && v > u) {
        emit(u);
        self_done = true;
      }
      emit(v);
    }
    if (!self_done) emit(u);
    m.offsets.push_back(static_cast<Index>(m.columns.size()));
  }
  return s;
}

/// S^k X as the fixed preprocessing of the linear graph model.
struct PropagatedFeatures {
  Matrix values;
  Index depth = 0;
};

inline PropagatedFeatures propagate(const NormalizedAdjacency& s, const Matrix& x, Index k) {
  if (k < 0) throw Error("propagate: depth must be non-negative");
  if (x.rows() != s.num_nodes()) throw DimensionError("propagate: feature rows != adjacency size");
  PropagatedFeatures out{x, k};
  for (Index step = 0; step < k; ++step) out.values = s.matrix.multiply(out.values);
  return out;
}

struct InducedSubgraph {
  Graph graph;
  /// new index -> original index
  std::vector<Index> original_index;
  /// original index -> new index, -1 when dropped
  std::vector<Index> new_index;
};

/// Subgraph on `nodes` (kept in ascending original order) with the edges among them.
inline InducedSubgraph induced_subgraph(const Graph& g, std::span<const Index> nodes) {
  if (nodes.empty()) throw Error("induced_subgraph: empty node set");
  InducedSubgraph sub;
  sub.original_index.assign(nodes.begin(), nodes.end());
  std::sort(sub.original_index.begin(), sub.original_index.end());
  sub.original_index.erase(std::unique(sub.original_index.begin(), sub.original_index.end()),
                           sub.original_index.end());
  sub.new_index.assign(static_cast<std::size_t>(g.num_nodes), -1);
  for (std::size_t i = 0; i < sub.original_index.size(); ++i) {
    const Index u = sub.original_index[i];
    if (u < 0 || u >= g.num_nodes) throw Error("induced_subgraph: node index out of range");
    sub.new_index[static_cast<std::size_t>(u)] = static_cast<Index>(i);
  }

  const auto n = static_cast<Index>(sub.original_index.size());
  Graph& h = sub.graph;
  h.num_nodes = n;
  h.csr_offsets.assign(1, 0);
  h.features.resize(n, g.feature_dim());
  h.labels.resize(static_cast<std::size_t>(n));
  h.class_count = g.class_count;
  for (Index i = 0; i < n; ++i) {
    const Index u = sub.original_index[static_cast<std::size_t>(i)];
    for (Index v : g.neighbors(u)) {
      const Index nv = sub.new_index[static_cast<std::size_t>(v)];
      if (nv >= 0) h.csr_neighbors.push_back(nv);
    }
    h.csr_offsets.push_back(static_cast<Index>(h.csr_neighbors.size()));
    h.features.row(i) = g.features.row(u);
    h.labels[static_cast<std::size_t>(i)] = g.labels[static_cast<std::size_t>(u)];
  }
  return sub;
}

}  // namespace replaygraph
