#include "countingdino/matching.hpp"

#include <string>
#include <utility>

#include "countingdino/errors.hpp"
#include "countingdino/feature_map.hpp"

namespace cdino {

ExemplarKernel::ExemplarKernel(std::size_t height, std::size_t width, std::size_t channels,
                               std::vector<double> weights, PatchBox source, bool masked)
    : height_(height),
      width_(width),
      channels_(channels),
      weights_(std::move(weights)),
      source_(source),
      masked_(masked) {
    if (height_ == 0 || width_ == 0 || channels_ == 0) {
        throw ShapeError("kernel dims must be >= 1");
    }
    if (weights_.size() != height_ * width_ * channels_) {
        throw ShapeError("kernel payload does not match " + std::to_string(height_) + "x" +
                         std::to_string(width_) + "x" + std::to_string(channels_));
    }
}

ExemplarKernel extract_kernel(const FeatureMap& map, const PatchBox& box,
                              const EllipticalMask& mask, bool apply_mask) {
    if (box.width() == 0 || box.height() == 0 || box.row2 > map.rows() || box.col2 > map.cols()) {
        throw ShapeError("exemplar box does not fit the feature map");
    }
    if (mask.weights.rows() != box.height() || mask.weights.cols() != box.width()) {
        throw ShapeError("mask dims do not match the exemplar box");
    }
    const std::size_t d = map.channels();
    std::vector<double> weights;
    weights.reserve(box.area() * d);
    for (std::size_t i = 0; i < box.height(); ++i) {
        for (std::size_t j = 0; j < box.width(); ++j) {
            const double scale = apply_mask ? mask.weights(i, j) : 1.0;
            for (float v : map.cell(box.row1 + i, box.col1 + j)) weights.push_back(scale * v);
        }
    }
    return {box.height(), box.width(), d, std::move(weights), box, apply_mask};
}

SimilarityMap correlate(const FeatureMap& map, const ExemplarKernel& kernel) {
    if (kernel.channels() != map.channels()) {
        throw ShapeError("kernel has " + std::to_string(kernel.channels()) +
                         " channels, map has " + std::to_string(map.channels()));
    }
    const auto rows = static_cast<std::ptrdiff_t>(map.rows());
    const auto cols = static_cast<std::ptrdiff_t>(map.cols());
    const auto kh = static_cast<std::ptrdiff_t>(kernel.height());
    const auto kw = static_cast<std::ptrdiff_t>(kernel.width());
    const std::ptrdiff_t anchor_r = (kh - 1) / 2;
    const std::ptrdiff_t anchor_c = (kw - 1) / 2;
    const std::size_t d = map.channels();

    SimilarityMap out{Grid(map.rows(), map.cols()), 1};
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t i = 0; i < kh; ++i) {
                const std::ptrdiff_t mr = r - anchor_r + i;
                if (mr < 0 || mr >= rows) continue;
                for (std::ptrdiff_t j = 0; j < kw; ++j) {
                    const std::ptrdiff_t mc = c - anchor_c + j;
                    if (mc < 0 || mc >= cols) continue;
                    const auto k = kernel.cell(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                    const auto f = map.cell(static_cast<std::size_t>(mr), static_cast<std::size_t>(mc));
                    for (std::size_t ch = 0; ch < d; ++ch) acc += k[ch] * static_cast<double>(f[ch]);
                }
            }
            out.values(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
    return out;
}

SimilarityMap aggregate(std::span<const SimilarityMap> maps) {
    if (maps.empty()) throw ArgumentError("cannot aggregate an empty list of similarity maps");
    const Grid& first = maps.front().values;
    SimilarityMap out{Grid(first.rows(), first.cols()), maps.size()};
    for (const auto& m : maps) {
        if (!m.values.same_shape(first)) throw ShapeError("similarity maps are not aligned");
        auto dst = out.values.values();
        auto src = m.values.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    const double n = static_cast<double>(maps.size());
    for (auto& v : out.values.values()) v /= n;
    return out;
}

}  // namespace cdino
