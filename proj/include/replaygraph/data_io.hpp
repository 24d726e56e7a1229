#pragma once

#include "replaygraph/common.hpp"
#include "replaygraph/graph.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

namespace replaygraph {

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// Citation networks (.content / .cites)
// ---------------------------------------------------------------------------

struct CitationDataset {
  Graph graph;
  std::vector<std::string> node_ids;     ///< original paper id per node
  std::vector<std::string> label_names;  ///< class id -> label string, first-appearance order
  std::size_t dropped_edges = 0;         ///< cites lines naming an unknown paper
};

inline CitationDataset load_citation_dataset(const std::filesystem::path& content_path,
                                             const std::filesystem::path& cites_path) {
  std::ifstream content(content_path);
  if (!content) throw Error("cannot open " + content_path.string());

  CitationDataset ds;
  std::unordered_map<std::string, Index> id_to_node;
  std::unordered_map<std::string, ClassId> label_to_class;
  std::vector<std::vector<double>> rows;
  std::vector<ClassId> labels;
  std::size_t width = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(content, line)) {
    ++line_no;
    std::istringstream in(line);
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(std::move(t));
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ParseError(content_path.string(), line_no, "expected <id> <attrs...> <label>");
    const std::size_t w = tok.size() - 2;
    if (rows.empty()) width = w;
    if (w != width)
      throw ParseError(content_path.string(), line_no,
                       "inconsistent attribute width " + std::to_string(w) + " (expected " + std::to_string(width) + ")");
    std::vector<double> attrs(w);
    for (std::size_t i = 0; i < w; ++i) {
      try {
        std::size_t used = 0;
        attrs[i] = std::stod(tok[i + 1], &used);
        if (used != tok[i + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(content_path.string(), line_no, "bad attribute value '" + tok[i + 1] + "'");
      }
    }
    if (!id_to_node.emplace(tok.front(), static_cast<Index>(rows.size())).second)
      throw ParseError(content_path.string(), line_no, "duplicate node id " + tok.front());
    auto [it, inserted] = label_to_class.emplace(tok.back(), static_cast<ClassId>(ds.label_names.size()));
    if (inserted) ds.label_names.push_back(tok.back());
    labels.push_back(it->second);
    ds.node_ids.push_back(tok.front());
    rows.push_back(std::move(attrs));
  }
  if (rows.empty()) throw Error(content_path.string() + ": no nodes");

  std::ifstream cites(cites_path);
  if (!cites) throw Error("cannot open " + cites_path.string());
  std::vector<std::pair<Index, Index>> edges;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    std::istringstream in(line);
    std::string a, b, extra;
    if (!(in >> a)) continue;
    if (!(in >> b) || (in >> extra)) throw ParseError(cites_path.string(), line_no, "expected <cited_id> <citing_id>");
    auto ia = id_to_node.find(a);
    auto ib = id_to_node.find(b);
    if (ia == id_to_node.end() || ib == id_to_node.end()) {
      ++ds.dropped_edges;
      continue;
    }
    edges.emplace_back(ia->second, ib->second);
  }

  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  ds.graph = make_graph(static_cast<Index>(rows.size()), edges, std::move(x), std::move(labels),
                        static_cast<ClassId>(ds.label_names.size()));
  return ds;
}

// ---------------------------------------------------------------------------
// Task sequences
// ---------------------------------------------------------------------------

struct TaskSpec {
  int task_id = 0;
  ClassMask classes;
  std::vector<Index> train_nodes;
  std::vector<Index> test_nodes;

  /// train ∪ test, ascending.
  [[nodiscard]] std::vector<Index> all_nodes() const {
    std::vector<Index> all = train_nodes;
    all.insert(all.end(), test_nodes.begin(), test_nodes.end());
    std::sort(all.begin(), all.end());
    return all;
  }
};

struct TaskSequence {
  Graph graph;
  std::vector<TaskSpec> tasks;
};

/// Deterministic per-stream seed, so sampling one class does not shift another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Classes 0..classes_per_task*num_tasks-1 are split in order into tasks; the
/// highest class ids are left out when the count does not divide.
inline TaskSequence build_task_sequence(const Graph& g, Index classes_per_task, Index num_tasks,
                                        Index train_per_class, std::uint64_t seed) {
  if (classes_per_task < 1 || num_tasks < 1) throw Error("build_task_sequence: need at least one class and task");
  if (classes_per_task * num_tasks > g.class_count)
    throw Error("build_task_sequence: " + std::to_string(classes_per_task * num_tasks) + " classes requested, graph has " +
                std::to_string(g.class_count));
  if (train_per_class < 1) throw Error("build_task_sequence: train_per_class must be >= 1");

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(g.class_count));
  for (Index u = 0; u < g.num_nodes; ++u) by_class[static_cast<std::size_t>(g.labels[static_cast<std::size_t>(u)])].push_back(u);

  TaskSequence seq;
  seq.graph = g;
  for (Index t = 0; t < num_tasks; ++t) {
    TaskSpec task;
    task.task_id = static_cast<int>(t);
    std::vector<ClassId> classes;
    for (Index k = 0; k < classes_per_task; ++k) {
      const auto c = static_cast<ClassId>(t * classes_per_task + k);
      classes.push_back(c);
      std::vector<Index> nodes = by_class[static_cast<std::size_t>(c)];
      if (static_cast<Index>(nodes.size()) < train_per_class + 1)
        throw Error("build_task_sequence: class " + std::to_string(c) + " has " + std::to_string(nodes.size()) +
                    " nodes, need at least " + std::to_string(train_per_class + 1));
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
      std::shuffle(nodes.begin(), nodes.end(), rng);
      task.train_nodes.insert(task.train_nodes.end(), nodes.begin(), nodes.begin() + train_per_class);
      task.test_nodes.insert(task.test_nodes.end(), nodes.begin() + train_per_class, nodes.end());
    }
    std::sort(task.train_nodes.begin(), task.train_nodes.end());
    std::sort(task.test_nodes.begin(), task.test_nodes.end());
    task.classes = ClassMask(std::move(classes));
    seq.tasks.push_back(std::move(task));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// MNIST (IDX) and permuted tasks
// ---------------------------------------------------------------------------

struct ImageSet {
  Matrix images;  ///< one flattened image per row, values in [0, 1]
  std::vector<ClassId> labels;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw Error(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace detail

inline Matrix load_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto magic = detail::read_be32(in, path.string());
  if (magic != 2051) throw Error(path.string() + ": bad magic number " + std::to_string(magic) + " (expected 2051)");
  const auto count = detail::read_be32(in, path.string());
  const auto rows = detail::read_be32(in, path.string());
  const auto cols = detail::read_be32(in, path.string());
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> buf(std::size_t{count} * pixels);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw Error(path.string() + ": truncated image data");
  Matrix m(static_cast<Index>(count), static_cast<Index>(pixels));
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i] / 255.0;
  return m;
}

inline std::vector<ClassId> load_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const auto magic = detail::read_be32(in, path.string());
  if (magic != 2049) throw Error(path.string() + ": bad magic number " + std::to_string(magic) + " (expected 2049)");
  const auto count = detail::read_be32(in, path.string());
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw Error(path.string() + ": truncated label data");
  return {buf.begin(), buf.end()};
}

/// Reads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte` from `dir`.
inline ImageSet load_mnist(const std::filesystem::path& dir, const std::string& prefix = "train") {
  ImageSet set;
  set.images = load_idx_images(dir / (prefix + "-images-idx3-ubyte"));
  set.labels = load_idx_labels(dir / (prefix + "-labels-idx1-ubyte"));
  if (static_cast<Index>(set.labels.size()) != set.images.rows())
    throw Error("mnist: " + std::to_string(set.labels.size()) + " labels for " + std::to_string(set.images.rows()) +
                " images");
  return set;
}

/// Column permutation: out(:, j) = in(:, perm[j]).
struct PixelPermutation {
  std::vector<Index> perm;

  static PixelPermutation identity(Index n) {
    PixelPermutation p;
    p.perm.resize(static_cast<std::size_t>(n));
    std::iota(p.perm.begin(), p.perm.end(), Index{0});
    return p;
  }

  [[nodiscard]] bool is_bijection() const {
    std::vector<char> seen(perm.size(), 0);
    for (Index j : perm) {
      if (j < 0 || j >= static_cast<Index>(perm.size()) || seen[static_cast<std::size_t>(j)]) return false;
      seen[static_cast<std::size_t>(j)] = 1;
    }
    return true;
  }

  [[nodiscard]] PixelPermutation inverse() const {
    PixelPermutation inv;
    inv.perm.resize(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) inv.perm[static_cast<std::size_t>(perm[j])] = static_cast<Index>(j);
    return inv;
  }

  [[nodiscard]] Matrix apply(const Matrix& images) const {
    if (images.cols() != static_cast<Index>(perm.size())) throw DimensionError("permutation width mismatch");
    Matrix out(images.rows(), images.cols());
    for (std::size_t j = 0; j < perm.size(); ++j) out.col(static_cast<Index>(j)) = images.col(perm[j]);
    return out;
  }
};

struct ImageTask {
  int task_id = 0;
  PixelPermutation pixel_permutation;
  Matrix train_images;
  std::vector<ClassId> train_labels;
  Matrix test_images;
  std::vector<ClassId> test_labels;
  std::vector<Index> train_source;  ///< row of the source image set
};

/// Task 0 keeps pixel order; each later task gets its own seeded permutation.
/// Each task draws its own disjoint train/test images from the pool.
inline std::vector<ImageTask> make_permuted_tasks(const ImageSet& data, Index num_tasks, Index per_task_train,
                                                  Index per_task_test, std::uint64_t seed) {
  const Index n = data.images.rows();
  if (per_task_train + per_task_test > n)
    throw Error("make_permuted_tasks: " + std::to_string(per_task_train + per_task_test) + " images per task, pool has " +
                std::to_string(n));
  std::vector<ImageTask> tasks;
  for (Index t = 0; t < num_tasks; ++t) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    ImageTask task;
    task.task_id = static_cast<int>(t);
    task.pixel_permutation = PixelPermutation::identity(data.images.cols());
    if (t > 0) std::shuffle(task.pixel_permutation.perm.begin(), task.pixel_permutation.perm.end(), rng);

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> train(order.begin(), order.begin() + per_task_train);
    std::vector<Index> test(order.begin() + per_task_train, order.begin() + per_task_train + per_task_test);
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());

    auto gather = [&](const std::vector<Index>& rows, Matrix& images, std::vector<ClassId>& labels) {
      Matrix raw(static_cast<Index>(rows.size()), data.images.cols());
      labels.clear();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        raw.row(static_cast<Index>(i)) = data.images.row(rows[i]);
        labels.push_back(data.labels[static_cast<std::size_t>(rows[i])]);
      }
      images = task.pixel_permutation.apply(raw);
    };
    gather(train, task.train_images, task.train_labels);
    gather(test, task.test_images, task.test_labels);
    task.train_source = std::move(train);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Synthetic fixtures
// ---------------------------------------------------------------------------

/// Stochastic block model; features are one-hot block id plus N(0, noise^2).
inline Graph synthetic_sbm_graph(const std::vector<Index>& blocks, double intra_p, double inter_p, double feature_noise,
                                 std::uint64_t seed) {
  if (intra_p < 0 || intra_p > 1 || inter_p < 0 || inter_p > 1) throw Error("synthetic_sbm_graph: probabilities must be in [0,1]");
  if (feature_noise < 0) throw Error("synthetic_sbm_graph: feature_noise must be >= 0");
  std::vector<ClassId> labels;
  for (std::size_t b = 0; b < blocks.size(); ++b) labels.insert(labels.end(), static_cast<std::size_t>(blocks[b]), static_cast<ClassId>(b));
  const auto n = static_cast<Index>(labels.size());
  const auto k = static_cast<Index>(blocks.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::pair<Index, Index>> edges;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v) {
      const double p = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)] ? intra_p : inter_p;
      if (coin(rng) < p) edges.emplace_back(u, v);
    }
  Matrix x = Matrix::Zero(n, k);
  for (Index u = 0; u < n; ++u) {
    x(u, labels[static_cast<std::size_t>(u)]) = 1.0;
    for (Index j = 0; j < k; ++j) x(u, j) += feature_noise * noise(rng);
  }
  return make_graph(n, edges, std::move(x), std::move(labels), static_cast<ClassId>(k));
}

}  // namespace replaygraph
