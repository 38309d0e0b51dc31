#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "countingdino/geometry.hpp"
#include "countingdino/grid.hpp"

namespace cdino {

class FeatureMap;

/// Exemplar feature crop used as a correlation kernel, height x width x
/// channels, channel fastest.
class ExemplarKernel {
public:
    ExemplarKernel(std::size_t height, std::size_t width, std::size_t channels,
                   std::vector<double> weights, PatchBox source = {}, bool masked = false);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    const PatchBox& source() const noexcept { return source_; }
    bool masked() const noexcept { return masked_; }

    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> cell(std::size_t i, std::size_t j) const noexcept {
        return {weights_.data() + (i * width_ + j) * channels_, channels_};
    }

private:
    std::size_t height_;
    std::size_t width_;
    std::size_t channels_;
    std::vector<double> weights_;
    PatchBox source_;
    bool masked_;
};

struct SimilarityMap {
    Grid values;
    std::size_t n_exemplars_aggregated = 1;
};

/// Crops the cells under `box`; when `apply_mask` is set each cell vector is
/// scaled by the matching mask weight.
ExemplarKernel extract_kernel(const FeatureMap& map, const PatchBox& box,
                              const EllipticalMask& mask, bool apply_mask);

/// Zero-padded "same" cross-correlation (no kernel flip). The kernel anchor
/// sits at (floor((h-1)/2), floor((w-1)/2)), so output (r, c) compares the
/// kernel against the window whose anchor cell is (r, c) and the output has
/// the map's spatial dims for every kernel size.
SimilarityMap correlate(const FeatureMap& map, const ExemplarKernel& kernel);

/// Element-wise mean of co-registered similarity maps.
SimilarityMap aggregate(std::span<const SimilarityMap> maps);

}  // namespace cdino
