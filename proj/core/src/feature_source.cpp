#include "countingdino/feature_source.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "countingdino/errors.hpp"
#include "countingdino/tensorio.hpp"

namespace cdino {

FileSource::FileSource(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::filesystem::path FileSource::resolve(std::string_view image_id, int resolution_level) const {
    const std::filesystem::path id{std::string(image_id)};
    const std::string full = id.filename().string() + ".cdfm";
    const std::string stem = id.stem().string() + ".cdfm";
    const auto level_dir = directory_ / ("k" + std::to_string(resolution_level));
    for (const auto& candidate : {level_dir / full, level_dir / stem, directory_ / full,
                                  directory_ / stem}) {
        std::error_code ec;
        if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
    }
    return {};
}

FeatureMap FileSource::features_for(std::string_view image_id, int resolution_level) const {
    const auto path = resolve(image_id, resolution_level);
    if (path.empty()) {
        throw IoError("no feature file for image '" + std::string(image_id) + "' under " +
                      directory_.string());
    }
    FeatureMap map = load_feature_map(path);
    if (map.resolution_level() != resolution_level) {
        throw ArgumentError(path.string() + " was exported at resolution level " +
                            std::to_string(map.resolution_level()) + ", requested " +
                            std::to_string(resolution_level));
    }
    return map;
}

RgbImage pad_to_multiple(const RgbImage& image, std::size_t multiple) {
    if (image.height == 0 || image.width == 0) throw ShapeError("empty image");
    if (image.pixels.size() != image.height * image.width * 3) {
        throw ShapeError("image payload does not match its dimensions");
    }
    const auto round_up = [multiple](std::size_t v) { return (v + multiple - 1) / multiple * multiple; };
    RgbImage out;
    out.height = round_up(image.height);
    out.width = round_up(image.width);
    out.pixels.resize(out.height * out.width * 3);
    for (std::size_t y = 0; y < out.height; ++y) {
        const std::size_t sy = std::min(y, image.height - 1);
        for (std::size_t x = 0; x < out.width; ++x) {
            const std::size_t sx = std::min(x, image.width - 1);
            for (std::size_t ch = 0; ch < 3; ++ch) out.at(y, x, ch) = image.at(sy, sx, ch);
        }
    }
    return out;
}

namespace {

RgbImage crop_tile(const RgbImage& image, std::size_t y0, std::size_t x0, std::size_t h,
                   std::size_t w) {
    RgbImage tile;
    tile.height = h;
    tile.width = w;
    tile.pixels.resize(h * w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        const auto* src = image.pixels.data() + ((y0 + y) * image.width + x0) * 3;
        std::copy(src, src + w * 3, tile.pixels.begin() + static_cast<std::ptrdiff_t>(y * w * 3));
    }
    return tile;
}

}  // namespace

FeatureMap extract_tiled_features(const RgbImage& image, int k, const Backbone& backbone) {
    if (k < 0 || k > 15) throw ArgumentError("resolution level out of range: " + std::to_string(k));
    const int patch = backbone.patch_size();
    if (patch <= 0) throw ArgumentError("backbone patch size must be positive");
    const auto p = static_cast<std::size_t>(patch);
    const std::size_t side = std::size_t{1} << k;
    const std::size_t d = backbone.channels();

    const RgbImage padded = pad_to_multiple(image, side * p);
    const std::size_t tile_h = padded.height / side;
    const std::size_t tile_w = padded.width / side;
    const std::size_t lq = tile_h / p;
    const std::size_t vq = tile_w / p;

    std::vector<FeatureMap> quadrants;
    quadrants.reserve(side * side);
    for (std::size_t qr = 0; qr < side; ++qr) {
        for (std::size_t qc = 0; qc < side; ++qc) {
            const RgbImage tile = crop_tile(padded, qr * tile_h, qc * tile_w, tile_h, tile_w);
            std::vector<float> tokens = backbone.forward(tile);
            const std::size_t prefix = backbone.prefix_tokens();
            const std::size_t expected = (prefix + lq * vq) * d;
            if (tokens.size() != expected) {
                throw ShapeError("backbone returned " + std::to_string(tokens.size()) +
                                 " values for a " + std::to_string(lq) + "x" + std::to_string(vq) +
                                 " tile, expected " + std::to_string(expected));
            }
            tokens.erase(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(prefix * d));
            quadrants.emplace_back(lq, vq, d, std::move(tokens), patch,
                                   ImageGeometry::exact(lq, vq, patch), 0);
        }
    }

    const FeatureMap stitched = stitch_quadrants(quadrants, k);
    const std::size_t rows = (image.height + p - 1) / p;
    const std::size_t cols = (image.width + p - 1) / p;
    const ImageGeometry geometry{static_cast<std::uint32_t>(image.height),
                                 static_cast<std::uint32_t>(image.width),
                                 static_cast<std::uint32_t>(rows * p),
                                 static_cast<std::uint32_t>(cols * p)};
    return crop_cells(stitched, rows, cols, geometry);
}

BackboneSource::BackboneSource(std::shared_ptr<const Backbone> backbone, ImageLoader loader)
    : backbone_(std::move(backbone)), loader_(std::move(loader)) {
    if (!backbone_) throw ArgumentError("BackboneSource needs a backbone");
    if (!loader_) throw ArgumentError("BackboneSource needs an image loader");
}

FeatureMap BackboneSource::features_for(std::string_view image_id, int resolution_level) const {
    return extract_tiled_features(loader_(image_id), resolution_level, *backbone_);
}

}  // namespace cdino
