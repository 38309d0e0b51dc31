#pragma once

#include <cstddef>
#include <span>

#include "countingdino/grid.hpp"

namespace cdino {

class FeatureMap;

/// Axis-aligned box in pixel coordinates, origin top-left.
struct PixelBox {
    double x1 = 0;
    double y1 = 0;
    double x2 = 0;
    double y2 = 0;

    bool valid() const noexcept;
    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Half-open box [col1, col2) x [row1, row2) on the feature-cell grid.
struct PatchBox {
    std::size_t col1 = 0;
    std::size_t row1 = 0;
    std::size_t col2 = 0;
    std::size_t row2 = 0;

    std::size_t width() const noexcept { return col2 - col1; }
    std::size_t height() const noexcept { return row2 - row1; }
    std::size_t area() const noexcept { return width() * height(); }
    bool contains(std::size_t r, std::size_t c) const noexcept {
        return r >= row1 && r < row2 && c >= col1 && c < col2;
    }

    friend bool operator==(const PatchBox&, const PatchBox&) = default;
};

/// Maps a pixel box onto the patch grid by flooring the top-left and
/// ceiling the bottom-right corner at a pitch of `patch_size` pixels, then
/// clamping to the grid. The result always covers every pixel of the input
/// that lies on the grid. Throws GeometryError for malformed boxes or boxes
/// that end up empty after clamping.
PatchBox snap_box(const PixelBox& box, int patch_size, std::size_t grid_rows,
                  std::size_t grid_cols);

/// snap_box() against the grid and patch size of `map`.
PatchBox snap_box(const PixelBox& box, const FeatureMap& map);

/// Supersample value selecting exact (analytic) cell coverage.
inline constexpr int kExactCoverage = 0;
inline constexpr int kDefaultSupersample = kExactCoverage;

/// Per-cell weights of an exemplar, height x width.
struct EllipticalMask {
    Grid weights;
    PatchBox source;
};

/// Fraction of each cell of `box` covered by the ellipse inscribed in the
/// box (centre (w/2, h/2), semi-axes w/2 and h/2 in cell units).
///
/// With `supersample` == 0 the fraction is the exact area of ellipse and
/// cell. With s >= 1 it is the share of an s x s grid of sub-cell centres
/// that fall inside the closed ellipse; this converges slowly (a 1x1 box
/// gives 0.7930 at s = 32 against pi/4 = 0.7854).
EllipticalMask elliptical_mask(const PatchBox& box, int supersample = kDefaultSupersample);

/// Area of the unit disc inside [u0, u1] x [v0, v1].
double unit_disc_rect_area(double u0, double u1, double v0, double v1);

/// All-ones mask over `box`; stands in for the ellipse when it is disabled.
EllipticalMask uniform_mask(const PatchBox& box);

/// Sums every exemplar mask into a rows x cols map at its box position.
/// Overlapping exemplars add up. Throws GeometryError if a box does not fit.
Grid accumulate_global_mask(std::span<const EllipticalMask> masks, std::size_t rows,
                            std::size_t cols);

}  // namespace cdino
