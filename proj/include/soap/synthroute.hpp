#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "soap/nnkernel.hpp"

namespace soap::synthroute {

inline constexpr int kChannels = 3;  // pin density, macro mask, net-crossing proxy

/// Weights of the congestion score; the label oracle in the tests uses the
/// same published constants.
inline constexpr double kPinWeight = 0.6;
inline constexpr double kPinMacroWeight = 0.3;
inline constexpr double kCrossingWeight = 0.1;

struct PlacementMap {
  std::vector<float> features;        // C x H x W, each in [0, 1]
  std::vector<std::uint8_t> labels;   // H x W, 0/1

  friend bool operator==(const PlacementMap&, const PlacementMap&) = default;
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct PlacementDataset {
  int height = 0;
  int width = 0;
  int channels = kChannels;
  std::uint64_t seed = 0;
  std::vector<PlacementMap> maps;
  std::vector<Split> splits;  // empty until split() is applied

  std::vector<int> indices(Split s) const;
  /// Copy holding only the maps tagged `s` (tags dropped).
  PlacementDataset subset(Split s) const;

  friend bool operator==(const PlacementDataset&, const PlacementDataset&) = default;
};

struct GenerateConfig {
  std::uint64_t seed = 0;
  int n_maps = 300;
  int height = 32;
  int width = 32;
  double hotspot_quantile = 0.1;
};

/// Synthetic placements. Each map draws from its own stream keyed by
/// (seed, map index); labels mark the ceil(q*H*W) highest congestion scores.
PlacementDataset generate(const GenerateConfig& cfg);

/// Congestion score per pixel from stored features: 3x3 box mean (in-bounds
/// neighbours only) of 0.6*pins + 0.3*pins*macro + 0.1*crossings.
std::vector<double> congestion_score(const PlacementMap& map, int height, int width);

/// Tags maps after a seeded shuffle: floor(f_val*n) val, floor(f_test*n)
/// test, the remainder train. Fractions are (train, val, test).
PlacementDataset split(PlacementDataset dataset, std::array<double, 3> fractions, std::uint64_t seed);

/// `SRDS` file: magic, u32 version=1, u32 n_maps, u16 H, u16 W, u8 C, then
/// per map C*H*W little-endian f32 features and H*W u8 labels. Split tags
/// and the seed are not part of the format.
void write_dataset(const PlacementDataset& dataset, const std::string& path);
PlacementDataset read_dataset(const std::string& path);

/// Batch tensors ([B,C,H,W] features, [B,1,H,W] labels) for the given maps.
struct Batch {
  nn::Tensor features;
  nn::Tensor labels;
};
Batch make_batch(const PlacementDataset& dataset, const std::vector<int>& map_indices);

}  // namespace soap::synthroute
