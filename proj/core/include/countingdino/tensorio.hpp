/**
 * @file tensorio.hpp
 * @brief CDFM feature-file format and quadrant stitching.
 *
 * CDFM v1 layout, all integers little-endian:
 *
 *   offset  size  field
 *   0       4     magic "CDFM"
 *   4       2     version (1)
 *   6       2     patch_size
 *   8       4     rows (L)
 *   12      4     cols (V)
 *   16      4     channels (D)
 *   20      4     image height
 *   24      4     image width
 *   28      4     effective (padded) height
 *   32      4     effective (padded) width
 *   36      2     resolution_level
 *   38      2     reserved (0)
 *   40      ...   L*V*D float32 LE, index ((row*V)+col)*D + channel
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "countingdino/feature_map.hpp"

namespace cdino {

inline constexpr std::size_t kCdfmHeaderSize = 40;
inline constexpr std::uint16_t kCdfmVersion = 1;

std::vector<std::byte> encode_cdfm(const FeatureMap& map);
FeatureMap decode_cdfm(std::span<const std::byte> bytes);

FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);

/// Reassembles a 2^k x 2^k grid of equally shaped quadrant maps, given in
/// row-major order, into one map of 2^k*Lq x 2^k*Vq cells. The result has
/// resolution_level k and an exact geometry of rows*P x cols*P pixels.
FeatureMap stitch_quadrants(std::span<const FeatureMap> quadrants, int k);

/// Keeps the top-left rows x cols cells and attaches `geometry`.
FeatureMap crop_cells(const FeatureMap& map, std::size_t rows, std::size_t cols,
                      ImageGeometry geometry);

}  // namespace cdino
