#pragma once

#include <span>
#include <vector>

#include "countingdino/geometry.hpp"
#include "countingdino/grid.hpp"
#include "countingdino/matching.hpp"

namespace cdino {

/// Normalized density estimate. `tau` is 0 until threshold_and_count() ran,
/// in which case `count == raw_count`.
struct DensityMap {
    Grid values;
    double z = 0;
    double tau = 0;
    double raw_count = 0;
    double count = 0;
};

/// The exemplar boxes B on the patch grid.
class ExemplarSet {
public:
    explicit ExemplarSet(std::vector<PatchBox> boxes);

    std::span<const PatchBox> boxes() const noexcept { return boxes_; }
    std::size_t size() const noexcept { return boxes_.size(); }
    std::size_t total_area() const noexcept;
    std::size_t largest_area() const noexcept;

private:
    std::vector<PatchBox> boxes_;
};

inline constexpr double kMinNormalization = 1e-9;

/// Affine rescale to [0, 1]. Throws DegenerateMapError for constant maps.
SimilarityMap minmax(const SimilarityMap& map);

/// z = (1/N) * sum(gmask .* s01). Throws DegenerateNormalizationError when
/// z <= kMinNormalization.
double normalization_factor(const SimilarityMap& s01, const Grid& global_mask, std::size_t n);

/// s01 / z, with raw_count = count = sum of the result.
DensityMap normalize(const SimilarityMap& s01, double z);

/// |B| / sum of box areas in patches.
double unit_count(const ExemplarSet& boxes);

/// Zeroes values strictly below tau = 1 / area(largest box) and integrates
/// what is left. No re-normalization happens after zeroing.
DensityMap threshold_and_count(DensityMap density, const ExemplarSet& boxes);

}  // namespace cdino
