#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cdino {

/// Pixel geometry of the image a feature map was extracted from.
/// `effective_*` are the padded dimensions the backbone actually saw
/// (after cropping padding-only patch rows/cols), so that
/// rows == ceil(effective_height / patch_size).
struct ImageGeometry {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t effective_height = 0;
    std::uint32_t effective_width = 0;

    friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;

    /// Geometry of an image that exactly tiles a rows x cols patch grid.
    static ImageGeometry exact(std::size_t rows, std::size_t cols, int patch_size);
};

/// Dense patch-feature tensor, rows x cols x channels, row-major with the
/// channel index fastest. Immutable once built.
///
/// The constructor only checks that the payload length matches the shape;
/// value-level invariants (finite values, non-zero dims, geometry
/// consistency) are checked by validate(), which every reader, writer and
/// pipeline entry point calls.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(std::size_t rows, std::size_t cols, std::size_t channels,
               std::vector<float> data, int patch_size, ImageGeometry geometry,
               int resolution_level = 0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t channels() const noexcept { return channels_; }
    int patch_size() const noexcept { return patch_size_; }
    int resolution_level() const noexcept { return resolution_level_; }
    const ImageGeometry& geometry() const noexcept { return geometry_; }

    std::span<const float> data() const noexcept { return data_; }

    /// Feature vector of cell (r, c).
    std::span<const float> cell(std::size_t r, std::size_t c) const noexcept {
        return {data_.data() + (r * cols_ + c) * channels_, channels_};
    }
    float at(std::size_t r, std::size_t c, std::size_t d) const noexcept {
        return data_[(r * cols_ + c) * channels_ + d];
    }

    /// Throws ValidationError when an invariant does not hold.
    void validate() const;

    /// Bitwise equality of shape, header fields and payload.
    friend bool operator==(const FeatureMap& a, const FeatureMap& b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t channels_ = 0;
    int patch_size_ = 0;
    int resolution_level_ = 0;
    ImageGeometry geometry_;
    std::vector<float> data_;
};

/// Copy of `map` with every cell vector scaled to unit L2 norm. Zero
/// vectors are left untouched.
FeatureMap l2_normalized(const FeatureMap& map);

/// Copy of `map` with all features multiplied by `factor`.
FeatureMap scaled(const FeatureMap& map, float factor);

}  // namespace cdino
