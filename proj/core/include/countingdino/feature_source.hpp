#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "countingdino/feature_map.hpp"

namespace cdino {

/// Provides the dense feature map of an image at a given resolution level.
class FeatureSource {
public:
    virtual ~FeatureSource() = default;
    virtual FeatureMap features_for(std::string_view image_id, int resolution_level) const = 0;
};

/// Reads CDFM files from a directory. For image id "7.jpg" it looks for
/// `k<level>/7.jpg.cdfm`, `k<level>/7.cdfm`, `7.jpg.cdfm` and `7.cdfm`, in that
/// order, and rejects files exported at a different resolution level.
class FileSource final : public FeatureSource {
public:
    explicit FileSource(std::filesystem::path directory);

    FeatureMap features_for(std::string_view image_id, int resolution_level) const override;

    /// First existing candidate path, or an empty path.
    std::filesystem::path resolve(std::string_view image_id, int resolution_level) const;

private:
    std::filesystem::path directory_;
};

/// Interleaved RGB image, height x width x 3 floats, row-major.
struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    float at(std::size_t y, std::size_t x, std::size_t ch) const {
        return pixels[(y * width + x) * 3 + ch];
    }
    float& at(std::size_t y, std::size_t x, std::size_t ch) {
        return pixels[(y * width + x) * 3 + ch];
    }
};

/// A patch-token vision backbone. forward() receives a tile whose sides are
/// multiples of patch_size() and returns a (prefix_tokens() + patches) x
/// channels() row-major token matrix, patch tokens in raster order.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual int patch_size() const = 0;
    virtual std::size_t channels() const = 0;
    /// Class and register tokens emitted ahead of the patch tokens.
    virtual std::size_t prefix_tokens() const { return 0; }
    virtual std::vector<float> forward(const RgbImage& tile) const = 0;
};

/// Edge-replicates the right/bottom border so both sides become multiples
/// of `multiple`.
RgbImage pad_to_multiple(const RgbImage& image, std::size_t multiple);

/// Runs `backbone` on each of the 4^k quadrants of `image` and stitches the
/// patch tokens back together. The image is first padded to a multiple of
/// 2^k * P; patch rows/cols that only cover padding are cropped again, so the
/// result has ceil(H/P) x ceil(W/P) cells.
FeatureMap extract_tiled_features(const RgbImage& image, int k, const Backbone& backbone);

/// Feature source that decodes images on demand and runs a backbone.
class BackboneSource final : public FeatureSource {
public:
    using ImageLoader = std::function<RgbImage(std::string_view image_id)>;

    BackboneSource(std::shared_ptr<const Backbone> backbone, ImageLoader loader);

    FeatureMap features_for(std::string_view image_id, int resolution_level) const override;

private:
    std::shared_ptr<const Backbone> backbone_;
    ImageLoader loader_;
};

}  // namespace cdino
