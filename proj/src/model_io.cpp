#include "scate/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "scate/error.hpp"

namespace scate {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    bytes_.insert(bytes_.end(), bits.begin(), bits.end());
  }
  void put_magic(const char (&magic)[5]) { bytes_.insert(bytes_.end(), magic, magic + 4); }
  void put_f32(double v) { put<float>(static_cast<float>(v)); }
  Bytes finish() {
    const auto crc = static_cast<std::uint32_t>(::crc32(0L, bytes_.data(), static_cast<uInt>(bytes_.size())));
    put<std::uint32_t>(crc);
    return std::move(bytes_);
  }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char (&magic)[5], std::uint16_t version) : bytes_(bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0) {
      throw Error(ErrorCode::BadMagic, std::string("expected ") + magic);
    }
    if (bytes.size() < 10) throw Error(ErrorCode::Truncated, "header");
    const std::size_t body = bytes.size() - 4;
    pos_ = body;
    const auto stored = get<std::uint32_t>();
    const auto crc = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(body)));
    pos_ = 4;
    const auto found = get<std::uint16_t>();
    if (found != version) throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(found));
    if (stored != crc) throw Error(ErrorCode::CrcMismatch, "checksum does not match contents");
    end_ = body;
  }

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > (end_ ? end_ : bytes_.size())) throw Error(ErrorCode::Truncated, "unexpected end of data");
    std::array<std::uint8_t, sizeof(T)> bits{};
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  // Guards allocations against corrupted counts.
  void require(std::size_t n_bytes) const {
    if (pos_ + n_bytes > end_) throw Error(ErrorCode::Truncated, "declared sizes exceed the data");
  }

  void expect_end() const {
    if (pos_ != end_) throw Error(ErrorCode::Truncated, "trailing bytes after payload");
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace

Bytes serialize(const DistilledModel& model) {
  const auto& mlp = model.mlp;
  Writer w;
  w.put_magic("SCTE");
  w.put<std::uint16_t>(kScteVersion);
  w.put<std::uint8_t>(model.task == Task::Regression ? 0 : 1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mlp.input_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.coefficients.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mlp.layers()));
  for (int d : mlp.dims) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (Eigen::Index j = 0; j < model.scaling.mean.size(); ++j) w.put_f32(model.scaling.mean(j));
  for (Eigen::Index j = 0; j < model.scaling.std.size(); ++j) w.put_f32(model.scaling.std(j));
  for (int l = 0; l < mlp.layers(); ++l) {
    const auto& W = mlp.weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) w.put_f32(W(i, j));
    }
    for (Eigen::Index j = 0; j < mlp.biases[l].size(); ++j) w.put_f32(mlp.biases[l](j));
  }
  for (Eigen::Index j = 0; j < model.coefficients.size(); ++j) w.put_f32(model.coefficients(j));
  return w.finish();
}

DistilledModel deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "SCTE", kScteVersion);
  DistilledModel model;
  const auto task = r.get<std::uint8_t>();
  if (task > 1) throw Error(ErrorCode::UnsupportedVersion, "unknown task code");
  model.task = task == 0 ? Task::Regression : Task::BinaryClassification;
  const auto d_in = r.get<std::uint32_t>();
  const auto p = r.get<std::uint32_t>();
  const auto n_layers = r.get<std::uint32_t>();
  r.require(4ull * (n_layers + 1));
  std::vector<int> dims;
  for (std::uint32_t l = 0; l <= n_layers; ++l) dims.push_back(static_cast<int>(r.get<std::uint32_t>()));
  if (n_layers == 0 || dims.front() != static_cast<int>(d_in) || dims.back() < 1) {
    throw Error(ErrorCode::Truncated, "inconsistent layer dims");
  }
  std::uint64_t floats = 2ull * d_in + p;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    floats += static_cast<std::uint64_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  r.require(floats * 4);
  model.scaling.mean.resize(d_in);
  model.scaling.std.resize(d_in);
  for (std::uint32_t j = 0; j < d_in; ++j) model.scaling.mean(j) = r.get<float>();
  for (std::uint32_t j = 0; j < d_in; ++j) model.scaling.std(j) = r.get<float>();
  model.mlp.dims = dims;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    Matrix W(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = r.get<float>();
    }
    Vector b(dims[l + 1]);
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = r.get<float>();
    model.mlp.weights.push_back(std::move(W));
    model.mlp.biases.push_back(std::move(b));
  }
  model.coefficients.resize(p);
  for (std::uint32_t j = 0; j < p; ++j) model.coefficients(j) = r.get<float>();
  r.expect_end();
  if (static_cast<int>(p) != dims.back()) throw Error(ErrorCode::Truncated, "coefficient count differs from outputs");
  model.p = static_cast<int>(p);
  return model;
}

namespace {

Bytes serialize_trees(const std::vector<Tree>& trees, int n_features, std::uint8_t kind, double eta) {
  Writer w;
  w.put_magic("SCTF");
  w.put<std::uint16_t>(kSctfVersion);
  w.put<std::uint8_t>(kind);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n_features));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trees.size()));
  w.put_f32(eta);
  for (const auto& tree : trees) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tree.node_count()));
    for (int f : tree.feature) w.put<std::int32_t>(f);
    for (int node = 0; node < tree.node_count(); ++node) w.put_f32(tree.is_leaf(node) ? 0.0 : tree.threshold[node]);
    for (int v : tree.left) w.put<std::int32_t>(v);
    for (int v : tree.right) w.put<std::int32_t>(v);
    for (int node = 0; node < tree.node_count(); ++node) w.put_f32(tree.is_leaf(node) ? tree.value[node] : 0.0);
  }
  return w.finish();
}

}  // namespace

Bytes serialize_forest(const Forest& forest) { return serialize_trees(forest.trees, forest.n_features, 0, 1.0); }

Bytes serialize_forest(const GbmModel& model) {
  return serialize_trees(model.trees, model.n_features, 1, model.learning_rate);
}

MinimalForest deserialize_forest(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "SCTF", kSctfVersion);
  MinimalForest out;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) throw Error(ErrorCode::UnsupportedVersion, "unknown forest kind");
  out.kind = static_cast<MinimalForest::Kind>(kind);
  out.n_features = static_cast<int>(r.get<std::uint32_t>());
  const auto n_trees = r.get<std::uint32_t>();
  out.learning_rate = r.get<float>();
  for (std::uint32_t b = 0; b < n_trees; ++b) {
    const auto nodes = r.get<std::uint32_t>();
    r.require(static_cast<std::size_t>(nodes) * kSctfBytesPerNode);
    MinimalForest::MinimalTree t;
    t.feature.resize(nodes);
    t.threshold.resize(nodes);
    t.left.resize(nodes);
    t.right.resize(nodes);
    t.value.resize(nodes);
    for (auto& v : t.feature) v = r.get<std::int32_t>();
    for (auto& v : t.threshold) v = r.get<float>();
    for (auto& v : t.left) v = r.get<std::int32_t>();
    for (auto& v : t.right) v = r.get<std::int32_t>();
    for (auto& v : t.value) v = r.get<float>();
    for (std::uint32_t node = 0; node < nodes; ++node) {
      if (t.feature[node] < 0) continue;
      if (t.feature[node] >= out.n_features || t.left[node] <= static_cast<std::int32_t>(node) ||
          t.right[node] <= static_cast<std::int32_t>(node) || t.left[node] >= static_cast<std::int32_t>(nodes) ||
          t.right[node] >= static_cast<std::int32_t>(nodes)) {
        throw Error(ErrorCode::Truncated, "malformed tree links");
      }
    }
    out.trees.push_back(std::move(t));
  }
  r.expect_end();
  return out;
}

float MinimalForest::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_features) throw Error(ErrorCode::DimensionMismatch, "query width");
  float sum = 0.0f;
  for (const auto& t : trees) {
    std::int32_t node = 0;
    while (t.feature[node] >= 0) {
      node = static_cast<float>(x[t.feature[node]]) <= t.threshold[node] ? t.left[node] : t.right[node];
    }
    sum += t.value[node];
  }
  if (kind == Kind::Average) return trees.empty() ? 0.0f : sum / static_cast<float>(trees.size());
  return learning_rate * sum;
}

std::size_t scte_size(const std::vector<int>& dims) {
  const std::size_t layers = dims.size() - 1;
  std::size_t params = 0;
  for (std::size_t l = 0; l < layers; ++l) params += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  const std::size_t header = 4 + 2 + 1 + 4 + 4 + 4 + 4 * dims.size();
  return header + 4 * (2 * static_cast<std::size_t>(dims.front()) + params + dims.back()) + 4;
}

std::size_t measure_size(const DistilledModel& model) { return serialize(model).size(); }

std::size_t measure_size(const Forest& forest) {
  std::size_t total = kSctfFixedBytes;
  for (const auto& t : forest.trees) total += 4 + kSctfBytesPerNode * t.node_count();
  return total;
}

std::size_t measure_size(const GbmModel& model) {
  std::size_t total = kSctfFixedBytes;
  for (const auto& t : model.trees) total += 4 + kSctfBytesPerNode * t.node_count();
  return total;
}

void write_bytes(const Bytes& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Bytes read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace scate
