#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "countingdino/density.hpp"
#include "countingdino/geometry.hpp"
#include "countingdino/grid.hpp"

namespace cdino {

class FeatureMap;
class FeatureSource;

enum class DegeneratePolicy {
    error,       ///< rethrow DegenerateError
    zero_count,  ///< report count 0 with a warning
};

struct PipelineConfig {
    int resolution_level = 2;
    bool apply_ellipse = true;
    bool apply_threshold = true;
    bool normalize_features = false;
    int supersample = kDefaultSupersample;
    DegeneratePolicy degenerate_policy = DegeneratePolicy::error;
    std::size_t max_exemplars = 3;
    /// Keep the density maps in the result (needed for export_density()).
    bool keep_density = false;

    /// Throws ArgumentError when a field is out of range.
    void validate() const;
};

struct CountResult {
    std::string image_id;
    double count = 0;
    double raw_count = 0;
    double z = 0;
    double tau = 0;
    std::size_t n_exemplars = 0;
    std::vector<PatchBox> exemplar_boxes;
    /// Set when a degenerate map was turned into a zero count.
    std::optional<std::string> warning;
    /// Post- and pre-threshold density, only with keep_density.
    std::optional<Grid> density;
    std::optional<Grid> raw_density;
};

/// Full counting chain on an already extracted feature map. At most
/// cfg.max_exemplars boxes are used, taken from the front of `exemplars`.
CountResult count_features(const FeatureMap& map, std::span<const PixelBox> exemplars,
                           const PipelineConfig& cfg, std::string_view image_id = {});

/// Fetches the features of `image_id` at cfg.resolution_level and counts.
CountResult count_image(const FeatureSource& source, std::string_view image_id,
                        std::span<const PixelBox> exemplars, const PipelineConfig& cfg);

/// Writes `<stem>.csv` / `<stem>.png` for the final density and, when
/// `include_raw` is set, `<stem>_raw.csv` / `<stem>_raw.png` for the
/// pre-threshold one. Throws IoError on failure or missing density.
void export_density(const CountResult& result, const std::filesystem::path& stem,
                    bool include_raw = true);

void write_density_csv(const Grid& values, const std::filesystem::path& path);
Grid read_density_csv(const std::filesystem::path& path);

/// 8-bit grayscale, pixel = floor(255 * v / max); all zeros when max <= 0.
std::vector<unsigned char> density_to_gray(const Grid& values);
void write_density_png(const Grid& values, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
void from_json(const nlohmann::json& j, PipelineConfig& cfg);
void to_json(nlohmann::json& j, const PatchBox& box);
void from_json(const nlohmann::json& j, PatchBox& box);
void to_json(nlohmann::json& j, const CountResult& result);

}  // namespace cdino
