#include "countingdino/feature_map.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include "countingdino/errors.hpp"

namespace cdino {

ImageGeometry ImageGeometry::exact(std::size_t rows, std::size_t cols, int patch_size) {
    const auto h = static_cast<std::uint32_t>(rows * static_cast<std::size_t>(patch_size));
    const auto w = static_cast<std::uint32_t>(cols * static_cast<std::size_t>(patch_size));
    return {h, w, h, w};
}

FeatureMap::FeatureMap(std::size_t rows, std::size_t cols, std::size_t channels,
                       std::vector<float> data, int patch_size, ImageGeometry geometry,
                       int resolution_level)
    : rows_(rows),
      cols_(cols),
      channels_(channels),
      patch_size_(patch_size),
      resolution_level_(resolution_level),
      geometry_(geometry),
      data_(std::move(data)) {
    if (data_.size() != rows_ * cols_ * channels_) {
        throw ShapeError("feature payload has " + std::to_string(data_.size()) +
                         " values, expected " + std::to_string(rows_ * cols_ * channels_));
    }
}

void FeatureMap::validate() const {
    if (rows_ == 0 || cols_ == 0 || channels_ == 0) {
        throw ValidationError("feature map has a zero-sized dimension");
    }
    if (patch_size_ <= 0) throw ValidationError("patch size must be positive");
    if (resolution_level_ < 0) throw ValidationError("resolution level must be >= 0");
    const auto p = static_cast<std::size_t>(patch_size_);
    const auto ceil_div = [p](std::uint32_t v) { return (static_cast<std::size_t>(v) + p - 1) / p; };
    if (ceil_div(geometry_.effective_height) != rows_ ||
        ceil_div(geometry_.effective_width) != cols_) {
        throw ValidationError("effective image size " + std::to_string(geometry_.effective_height) +
                              "x" + std::to_string(geometry_.effective_width) +
                              " does not match a " + std::to_string(rows_) + "x" +
                              std::to_string(cols_) + " grid at patch size " +
                              std::to_string(patch_size_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw ValidationError("non-finite feature value at flat index " + std::to_string(i));
        }
    }
}

bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.channels_ == b.channels_ &&
           a.patch_size_ == b.patch_size_ && a.resolution_level_ == b.resolution_level_ &&
           a.geometry_ == b.geometry_ && a.data_.size() == b.data_.size() &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

FeatureMap l2_normalized(const FeatureMap& map) {
    std::vector<float> out(map.data().begin(), map.data().end());
    const std::size_t d = map.channels();
    for (std::size_t base = 0; base < out.size(); base += d) {
        double norm2 = 0;
        for (std::size_t k = 0; k < d; ++k) norm2 += double(out[base + k]) * out[base + k];
        if (norm2 <= 0) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t k = 0; k < d; ++k) out[base + k] = static_cast<float>(out[base + k] * inv);
    }
    return {map.rows(), map.cols(), d, std::move(out), map.patch_size(), map.geometry(),
            map.resolution_level()};
}

FeatureMap scaled(const FeatureMap& map, float factor) {
    std::vector<float> out(map.data().begin(), map.data().end());
    for (auto& v : out) v *= factor;
    return {map.rows(), map.cols(), map.channels(), std::move(out), map.patch_size(),
            map.geometry(), map.resolution_level()};
}

}  // namespace cdino
