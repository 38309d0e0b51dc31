#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "countingdino/geometry.hpp"
#include "countingdino/pipeline.hpp"

namespace cdino {

class FeatureSource;

enum class Split { train, val, test };

std::string_view to_string(Split split);
/// Accepts "train", "val" and "test". Throws ArgumentError otherwise.
Split parse_split(std::string_view name);

struct AnnotationRecord {
    std::string image_id;
    std::vector<PixelBox> exemplar_boxes;
    std::int64_t gt_count = 0;
    Split split = Split::test;
};

/// An annotation problem that did not stop parsing.
struct RecordIssue {
    std::string image_id;
    std::string message;
};

struct ParseResult {
    std::vector<AnnotationRecord> records;
    /// Skipped images, e.g. listed in the split file but not annotated.
    std::vector<RecordIssue> warnings;
    /// Records dropped because their annotation is malformed.
    std::vector<RecordIssue> errors;
};

/// FSC-147 layout: `annotation_json` maps image ids to objects with
/// "box_examples_coordinates" (four [x, y] corners per box) and "points";
/// `split_json` maps "train"/"val"/"test" to image id lists. Records come
/// out in split-file order. `only` restricts the output to one split.
ParseResult parse_fsc147(const std::filesystem::path& annotation_json,
                         const std::filesystem::path& split_json,
                         std::optional<Split> only = std::nullopt);

struct CarpkOptions {
    std::size_t exemplar_count = 3;
    /// Draw exemplars at random with this seed instead of taking the head.
    std::optional<std::uint64_t> random_seed;
};

/// CARPK layout: `root/Annotations/<id>.txt` with one "x1 y1 x2 y2 [class]"
/// box per line and `root/ImageSets/{train,test}.txt` id lists. `root` may
/// also be the annotation directory itself, in which case every record is
/// assigned to the test split.
ParseResult parse_carpk(const std::filesystem::path& root, const CarpkOptions& options = {},
                        std::optional<Split> only = std::nullopt);

struct ErrorMetrics {
    double mae = 0;
    double rmse = 0;
};

/// MAE and RMSE between ground truth and predicted counts. Throws
/// ArgumentError on empty or mismatched input.
ErrorMetrics compute_metrics(std::span<const double> gt, std::span<const double> pred);

struct ImageOutcome {
    std::string image_id;
    double gt = 0;
    double pred = 0;
    double abs_err = 0;

    friend bool operator==(const ImageOutcome&, const ImageOutcome&) = default;
};

struct EvalReport {
    std::string split;
    std::size_t n_images = 0;
    double mae = 0;
    double rmse = 0;
    std::vector<ImageOutcome> per_image;
    PipelineConfig config;
    std::vector<RecordIssue> failures;
};

/// Counts every record with `jobs` worker threads (0 = hardware
/// concurrency). Failing images are reported, not fatal; metrics cover the
/// successful ones and are reduced in image-id order. Throws
/// EvaluationError when nothing succeeded.
EvalReport evaluate(std::span<const AnnotationRecord> records, const FeatureSource& source,
                    const PipelineConfig& cfg, std::size_t jobs = 0);

void to_json(nlohmann::json& j, const RecordIssue& issue);
void from_json(const nlohmann::json& j, RecordIssue& issue);
void to_json(nlohmann::json& j, const ImageOutcome& outcome);
void from_json(const nlohmann::json& j, ImageOutcome& outcome);
void to_json(nlohmann::json& j, const EvalReport& report);
void from_json(const nlohmann::json& j, EvalReport& report);

}  // namespace cdino
