#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countingdino/geometry.hpp"

namespace cdino {

class FeatureMap;

/// Detector output for one image.
struct DetectionSet {
    std::string image_id;
    std::vector<PixelBox> boxes;
    std::vector<std::optional<double>> scores;
};

/// Reads `{"<image id>": [[x1, y1, x2, y2, score?], ...], ...}`.
std::map<std::string, DetectionSet> load_detections(const std::filesystem::path& path);

/// Mean of the snapped cells under `box`.
std::vector<double> pooled_feature(const FeatureMap& map, const PixelBox& box);

/// Mean over exemplars of their mean-pooled features.
std::vector<double> prototype(const FeatureMap& map, std::span<const PixelBox> exemplars);

/// Cosine similarity; nullopt when either vector has zero norm.
std::optional<double> cosine_similarity(std::span<const double> a, std::span<const double> b);

struct BaselineResult {
    std::size_t count = 0;
    /// Similarity per detection, nullopt for excluded (zero-norm) ones.
    std::vector<std::optional<double>> similarities;
    std::vector<std::string> warnings;
};

inline constexpr double kDefaultBaselineThreshold = 0.5;

/// Number of detections whose pooled feature has cosine similarity strictly
/// above `threshold` to `proto`.
BaselineResult filter_count(const FeatureMap& map, const DetectionSet& detections,
                            std::span<const double> proto,
                            double threshold = kDefaultBaselineThreshold);

/// Counting rule on precomputed similarities.
std::size_t count_above(std::span<const std::optional<double>> similarities, double threshold);

}  // namespace cdino
