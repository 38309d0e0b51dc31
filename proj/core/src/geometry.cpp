#include "countingdino/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "countingdino/errors.hpp"
#include "countingdino/feature_map.hpp"

namespace cdino {

bool PixelBox::valid() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 < x2 && y1 < y2;
}

namespace {

std::string describe(const PixelBox& b) {
    return "(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) +
           ", " + std::to_string(b.y2) + ")";
}

std::size_t clamp_index(double v, std::size_t limit) {
    if (v <= 0) return 0;
    if (v >= static_cast<double>(limit)) return limit;
    return static_cast<std::size_t>(v);
}

}  // namespace

PatchBox snap_box(const PixelBox& box, int patch_size, std::size_t grid_rows,
                  std::size_t grid_cols) {
    if (!box.valid()) throw GeometryError("malformed box " + describe(box));
    if (patch_size <= 0) throw GeometryError("patch size must be positive");

    const double p = patch_size;
    PatchBox out;
    out.col1 = clamp_index(std::floor(box.x1 / p), grid_cols);
    out.row1 = clamp_index(std::floor(box.y1 / p), grid_rows);
    out.col2 = clamp_index(std::ceil(box.x2 / p), grid_cols);
    out.row2 = clamp_index(std::ceil(box.y2 / p), grid_rows);
    if (out.col2 <= out.col1 || out.row2 <= out.row1) {
        throw GeometryError("box " + describe(box) + " falls outside the " +
                            std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                            " patch grid");
    }
    return out;
}

PatchBox snap_box(const PixelBox& box, const FeatureMap& map) {
    return snap_box(box, map.patch_size(), map.rows(), map.cols());
}

namespace {

// Area of the unit disc inside [0, u] x [0, v] for u, v >= 0.
double disc_corner_area(double u, double v) {
    u = std::min(u, 1.0);
    v = std::min(v, 1.0);
    if (u * u + v * v <= 1.0) return u * v;
    const auto primitive = [](double x) { return 0.5 * (x * std::sqrt(1.0 - x * x) + std::asin(x)); };
    const double xa = std::sqrt(std::max(0.0, 1.0 - v * v));
    return xa * v + primitive(u) - primitive(xa);
}

// Signed area of the disc inside the rectangle spanned by the origin and (u, v).
double disc_signed_area(double u, double v) {
    const double sign = (u < 0) != (v < 0) ? -1.0 : 1.0;
    return sign * disc_corner_area(std::abs(u), std::abs(v));
}

Grid exact_coverage(std::size_t h, std::size_t w) {
    const double a = 0.5 * static_cast<double>(w);
    const double b = 0.5 * static_cast<double>(h);
    Grid out(h, w);
    for (std::size_t i = 0; i < h; ++i) {
        const double v0 = (static_cast<double>(i) - b) / b;
        const double v1 = (static_cast<double>(i + 1) - b) / b;
        for (std::size_t j = 0; j < w; ++j) {
            const double u0 = (static_cast<double>(j) - a) / a;
            const double u1 = (static_cast<double>(j + 1) - a) / a;
            // Cells have unit area, so the covered area is the fraction.
            out(i, j) = std::clamp(a * b * unit_disc_rect_area(u0, u1, v0, v1), 0.0, 1.0);
        }
    }
    return out;
}

Grid sampled_coverage(std::size_t h, std::size_t w, int supersample) {
    // Sample offsets from the ellipse centre are measured in 1/(2s) cell
    // units, so the inside test is exact integer arithmetic and the mask is
    // exactly mirror-symmetric.
    const auto s = static_cast<std::int64_t>(supersample);
    const auto wi = static_cast<std::int64_t>(w);
    const auto hi = static_cast<std::int64_t>(h);
    if (s * wi * hi > (std::int64_t{1} << 30)) {
        throw ArgumentError("box too large for supersample " + std::to_string(supersample));
    }
    const std::int64_t radius2 = (s * wi * hi) * (s * wi * hi);
    const double samples = static_cast<double>(s * s);

    Grid out(h, w);
    for (std::int64_t i = 0; i < hi; ++i) {
        for (std::int64_t j = 0; j < wi; ++j) {
            std::int64_t inside = 0;
            for (std::int64_t a = 0; a < s; ++a) {
                const std::int64_t v = 2 * s * i + 2 * a + 1 - s * hi;
                const std::int64_t vy = v * v * wi * wi;
                for (std::int64_t b = 0; b < s; ++b) {
                    const std::int64_t u = 2 * s * j + 2 * b + 1 - s * wi;
                    if (u * u * hi * hi + vy <= radius2) ++inside;
                }
            }
            out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                static_cast<double>(inside) / samples;
        }
    }
    return out;
}

}  // namespace

double unit_disc_rect_area(double u0, double u1, double v0, double v1) {
    if (u1 <= u0 || v1 <= v0) return 0.0;
    u0 = std::clamp(u0, -1.0, 1.0);
    u1 = std::clamp(u1, -1.0, 1.0);
    v0 = std::clamp(v0, -1.0, 1.0);
    v1 = std::clamp(v1, -1.0, 1.0);
    return disc_signed_area(u1, v1) - disc_signed_area(u0, v1) - disc_signed_area(u1, v0) +
           disc_signed_area(u0, v0);
}

EllipticalMask elliptical_mask(const PatchBox& box, int supersample) {
    const std::size_t w = box.width();
    const std::size_t h = box.height();
    if (w == 0 || h == 0) throw GeometryError("elliptical mask of an empty box");
    if (supersample < 0) throw ArgumentError("supersample must be >= 0");
    return {supersample == kExactCoverage ? exact_coverage(h, w) : sampled_coverage(h, w, supersample),
            box};
}

EllipticalMask uniform_mask(const PatchBox& box) {
    if (box.width() == 0 || box.height() == 0) throw GeometryError("mask of an empty box");
    return {Grid(box.height(), box.width(), 1.0), box};
}

Grid accumulate_global_mask(std::span<const EllipticalMask> masks, std::size_t rows,
                            std::size_t cols) {
    Grid out(rows, cols);
    for (const auto& m : masks) {
        const PatchBox& b = m.source;
        if (b.row2 > rows || b.col2 > cols || b.width() == 0 || b.height() == 0) {
            throw GeometryError("exemplar box exceeds the " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " grid");
        }
        if (m.weights.rows() != b.height() || m.weights.cols() != b.width()) {
            throw ShapeError("mask dims do not match its box");
        }
        for (std::size_t i = 0; i < b.height(); ++i) {
            for (std::size_t j = 0; j < b.width(); ++j) out(b.row1 + i, b.col1 + j) += m.weights(i, j);
        }
    }
    return out;
}

}  // namespace cdino
