#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scate/distill.hpp"
#include "scate/ensemble.hpp"

namespace scate {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kScteVersion = 1;
inline constexpr std::uint16_t kSctfVersion = 1;

// SCTE v1, all little-endian:
//   "SCTE" | u16 version | u8 task | u32 d_in | u32 p | u32 n_layers |
//   u32 layer_dims[n_layers + 1] | f32 means[d_in] | f32 stds[d_in] |
//   per layer: f32 weights (fan_in x fan_out, row-major) then f32 biases |
//   f32 coefficients[p] | u32 CRC-32 of everything before it
Bytes serialize(const DistilledModel& model);
DistilledModel deserialize(std::span<const std::uint8_t> bytes);

// SCTF v1 minimal forest, all little-endian:
//   "SCTF" | u16 version | u8 kind (0 average, 1 boosted sum) | u32 n_features |
//   u32 n_trees | f32 learning_rate | per tree: u32 node_count, i32 feature[], f32 threshold[],
//   i32 left[], i32 right[], f32 value[] | u32 CRC-32
inline constexpr std::size_t kSctfFixedBytes = 4 + 2 + 1 + 4 + 4 + 4 + 4;
inline constexpr std::size_t kSctfBytesPerNode = 4 + 4 + 4 + 4 + 4;

Bytes serialize_forest(const Forest& forest);
Bytes serialize_forest(const GbmModel& model);

// Inference-only forest decoded from SCTF; arithmetic in single precision.
struct MinimalForest {
  enum class Kind : std::uint8_t { Average = 0, BoostedSum = 1 };
  struct MinimalTree {
    std::vector<std::int32_t> feature;
    std::vector<float> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<float> value;
  };
  Kind kind = Kind::Average;
  int n_features = 0;
  float learning_rate = 1.0f;
  std::vector<MinimalTree> trees;

  float predict(std::span<const double> x) const;
};

MinimalForest deserialize_forest(std::span<const std::uint8_t> bytes);

std::size_t measure_size(const DistilledModel& model);
std::size_t measure_size(const Forest& forest);
std::size_t measure_size(const GbmModel& model);
// Size of a model with these layer dims without building it.
std::size_t scte_size(const std::vector<int>& dims);

void write_bytes(const Bytes& bytes, const std::filesystem::path& path);
Bytes read_bytes(const std::filesystem::path& path);

}  // namespace scate
