#pragma once

#include "replaygraph/common.hpp"
#include "replaygraph/linear_model.hpp"
#include "replaygraph/mlp_model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace replaygraph {

// Snapshot layout:
//   "RGPS" | u32 LE header length | JSON header | float64 LE parameters
// The header carries {"schema_version", "model", "shapes", "count", "active_classes"}.

inline constexpr std::array<char, 4> kSnapshotMagic{'R', 'G', 'P', 'S'};
inline constexpr int kSnapshotSchemaVersion = 1;

struct ParameterSnapshot {
  nlohmann::json header;
  Vector parameters;
};

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                 static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void put_f64_le(std::ostream& out, double d) {
  auto bits = std::bit_cast<std::uint64_t>(d);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

}  // namespace detail

inline void write_snapshot(std::ostream& out, nlohmann::json header, const Vector& params) {
  header["schema_version"] = kSnapshotSchemaVersion;
  header["count"] = params.size();
  const std::string text = header.dump();
  out.write(kSnapshotMagic.data(), 4);
  detail::put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (Index i = 0; i < params.size(); ++i) detail::put_f64_le(out, params(i));
  if (!out) throw Error("snapshot: write failed");
}

inline ParameterSnapshot read_snapshot(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kSnapshotMagic) throw Error("snapshot: bad magic");
  std::array<unsigned char, 4> lb{};
  if (!in.read(reinterpret_cast<char*>(lb.data()), 4)) throw Error("snapshot: truncated header length");
  const std::uint32_t len = std::uint32_t{lb[0]} | (std::uint32_t{lb[1]} << 8) | (std::uint32_t{lb[2]} << 16) |
                            (std::uint32_t{lb[3]} << 24);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw Error("snapshot: truncated header");
  ParameterSnapshot snap;
  snap.header = nlohmann::json::parse(text);
  if (snap.header.value("schema_version", 0) != kSnapshotSchemaVersion) throw Error("snapshot: unsupported schema version");
  const auto count = snap.header.at("count").get<Index>();
  snap.parameters.resize(count);
  for (Index i = 0; i < count; ++i) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw Error("snapshot: truncated parameter data");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t{b[static_cast<std::size_t>(k)]} << (8 * k);
    snap.parameters(i) = std::bit_cast<double>(bits);
  }
  return snap;
}

inline nlohmann::json snapshot_header(const LinearModel& m) {
  return {{"model", "linear"},
          {"shapes", {{m.class_count(), m.input_dim()}, {m.class_count()}}},
          {"active_classes", m.active_classes().ids()}};
}

inline nlohmann::json snapshot_header(const MlpModel& m) {
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t l = 0; l + 1 < m.layer_sizes().size(); ++l) {
    shapes.push_back({m.layer_sizes()[l + 1], m.layer_sizes()[l]});
    shapes.push_back({m.layer_sizes()[l + 1]});
  }
  return {{"model", "mlp"},
          {"layer_sizes", m.layer_sizes()},
          {"activation", m.activation() == HiddenActivation::relu ? "relu" : "identity"},
          {"shapes", shapes},
          {"active_classes", m.active_classes().ids()}};
}

template <class M>
void save_model(const std::filesystem::path& path, const M& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_snapshot(out, snapshot_header(model), model.parameters());
}

inline ParameterSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_snapshot(in);
}

inline LinearModel linear_model_from(const ParameterSnapshot& snap) {
  if (snap.header.at("model") != "linear") throw Error("snapshot: not a linear model");
  const auto& shapes = snap.header.at("shapes");
  LinearModel m(shapes.at(0).at(0).get<Index>(), shapes.at(0).at(1).get<Index>());
  m.set_parameters(snap.parameters);
  m.activate(ClassMask(snap.header.at("active_classes").get<std::vector<ClassId>>()));
  return m;
}

inline MlpModel mlp_model_from(const ParameterSnapshot& snap) {
  if (snap.header.at("model") != "mlp") throw Error("snapshot: not an mlp model");
  MlpModel m(snap.header.at("layer_sizes").get<std::vector<Index>>(),
             snap.header.at("activation") == "relu" ? HiddenActivation::relu : HiddenActivation::identity);
  m.set_parameters(snap.parameters);
  m.activate(ClassMask(snap.header.at("active_classes").get<std::vector<ClassId>>()));
  return m;
}

}  // namespace replaygraph
