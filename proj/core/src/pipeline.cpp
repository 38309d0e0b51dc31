#include "countingdino/pipeline.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "countingdino/errors.hpp"
#include "countingdino/feature_map.hpp"
#include "countingdino/feature_source.hpp"
#include "countingdino/matching.hpp"

namespace cdino {

void PipelineConfig::validate() const {
    if (resolution_level < 0) throw ArgumentError("resolution level must be >= 0");
    if (supersample < 0) throw ArgumentError("supersample must be >= 0");
    if (max_exemplars < 1) throw ArgumentError("max_exemplars must be >= 1");
}

CountResult count_features(const FeatureMap& map, std::span<const PixelBox> exemplars,
                           const PipelineConfig& cfg, std::string_view image_id) {
    cfg.validate();
    map.validate();
    if (exemplars.empty()) throw ArgumentError("at least one exemplar box is required");

    const auto used = exemplars.first(std::min(exemplars.size(), cfg.max_exemplars));
    const FeatureMap normalized = cfg.normalize_features ? l2_normalized(map) : FeatureMap{};
    const FeatureMap& features = cfg.normalize_features ? normalized : map;

    CountResult result;
    result.image_id = std::string(image_id);
    result.n_exemplars = used.size();

    std::vector<EllipticalMask> masks;
    std::vector<SimilarityMap> similarities;
    masks.reserve(used.size());
    similarities.reserve(used.size());
    for (const auto& box : used) {
        const PatchBox snapped = snap_box(box, features);
        result.exemplar_boxes.push_back(snapped);
        masks.push_back(cfg.apply_ellipse ? elliptical_mask(snapped, cfg.supersample)
                                          : uniform_mask(snapped));
        const ExemplarKernel kernel =
            extract_kernel(features, snapped, masks.back(), cfg.apply_ellipse);
        similarities.push_back(correlate(features, kernel));
    }

    const ExemplarSet exemplar_set(result.exemplar_boxes);
    try {
        const SimilarityMap s01 = minmax(aggregate(similarities));
        const Grid global_mask = accumulate_global_mask(masks, features.rows(), features.cols());
        const double z = normalization_factor(s01, global_mask, used.size());
        DensityMap density = normalize(s01, z);
        if (cfg.keep_density) result.raw_density = density.values;
        if (cfg.apply_threshold) density = threshold_and_count(std::move(density), exemplar_set);

        result.z = density.z;
        result.tau = density.tau;
        result.raw_count = density.raw_count;
        result.count = density.count;
        if (cfg.keep_density) result.density = std::move(density.values);
    } catch (const DegenerateError& e) {
        if (cfg.degenerate_policy == DegeneratePolicy::error) throw;
        result.warning = std::string("degenerate similarity map, count set to 0: ") + e.what();
        if (cfg.keep_density) {
            result.density = Grid(features.rows(), features.cols());
            result.raw_density = result.density;
        }
    }
    return result;
}

CountResult count_image(const FeatureSource& source, std::string_view image_id,
                        std::span<const PixelBox> exemplars, const PipelineConfig& cfg) {
    cfg.validate();
    const FeatureMap map = source.features_for(image_id, cfg.resolution_level);
    return count_features(map, exemplars, cfg, image_id);
}

void write_density_csv(const Grid& values, const std::filesystem::path& path) {
    if (path.empty()) throw IoError("empty output path");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char buf[32];
    for (std::size_t r = 0; r < values.rows(); ++r) {
        for (std::size_t c = 0; c < values.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
            if (c > 0) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Grid read_density_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t n = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) throw FormatError("bad CSV cell '" + cell + "' in " + path.string());
            values.push_back(v);
            ++n;
        }
        if (rows == 0) cols = n;
        if (n != cols) throw FormatError("ragged CSV row in " + path.string());
        ++rows;
    }
    return {rows, cols, std::move(values)};
}

std::vector<unsigned char> density_to_gray(const Grid& values) {
    std::vector<unsigned char> out(values.size(), 0);
    if (values.empty()) return out;
    const double hi = values.max();
    if (!(hi > 0)) return out;
    const auto src = values.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double scaled = std::floor(255.0 * std::max(src[i], 0.0) / hi);
        out[i] = static_cast<unsigned char>(std::min(scaled, 255.0));
    }
    return out;
}

void write_density_png(const Grid& values, const std::filesystem::path& path) {
    if (path.empty()) throw IoError("empty output path");
    if (values.empty()) throw ShapeError("cannot write an empty density map");
    const auto pixels = density_to_gray(values);

    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(values.cols()),
                 static_cast<png_uint_32>(values.rows()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < values.rows(); ++r) {
        png_write_row(png, pixels.data() + r * values.cols());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void export_density(const CountResult& result, const std::filesystem::path& stem,
                    bool include_raw) {
    if (stem.empty()) throw IoError("empty output path");
    if (!result.density) throw IoError("density map was not retained for " + result.image_id);
    const std::string base = stem.string();
    write_density_csv(*result.density, base + ".csv");
    write_density_png(*result.density, base + ".png");
    if (include_raw) {
        if (!result.raw_density) throw IoError("raw density was not retained for " + result.image_id);
        write_density_csv(*result.raw_density, base + "_raw.csv");
        write_density_png(*result.raw_density, base + "_raw.png");
    }
}

namespace {

std::string_view policy_name(DegeneratePolicy p) {
    return p == DegeneratePolicy::error ? "error" : "zero-count";
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
    j = nlohmann::json{{"resolution_level", cfg.resolution_level},
                       {"apply_ellipse", cfg.apply_ellipse},
                       {"apply_threshold", cfg.apply_threshold},
                       {"normalize_features", cfg.normalize_features},
                       {"supersample", cfg.supersample},
                       {"degenerate_policy", policy_name(cfg.degenerate_policy)},
                       {"max_exemplars", cfg.max_exemplars}};
}

void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
    j.at("resolution_level").get_to(cfg.resolution_level);
    j.at("apply_ellipse").get_to(cfg.apply_ellipse);
    j.at("apply_threshold").get_to(cfg.apply_threshold);
    j.at("normalize_features").get_to(cfg.normalize_features);
    j.at("supersample").get_to(cfg.supersample);
    j.at("max_exemplars").get_to(cfg.max_exemplars);
    const auto policy = j.at("degenerate_policy").get<std::string>();
    if (policy == "error") {
        cfg.degenerate_policy = DegeneratePolicy::error;
    } else if (policy == "zero-count") {
        cfg.degenerate_policy = DegeneratePolicy::zero_count;
    } else {
        throw FormatError("unknown degenerate_policy '" + policy + "'");
    }
}

void to_json(nlohmann::json& j, const PatchBox& box) {
    j = nlohmann::json{{"col1", box.col1}, {"row1", box.row1}, {"col2", box.col2}, {"row2", box.row2}};
}

void from_json(const nlohmann::json& j, PatchBox& box) {
    j.at("col1").get_to(box.col1);
    j.at("row1").get_to(box.row1);
    j.at("col2").get_to(box.col2);
    j.at("row2").get_to(box.row2);
}

void to_json(nlohmann::json& j, const CountResult& result) {
    j = nlohmann::json{{"image_id", result.image_id},
                       {"count", result.count},
                       {"raw_count", result.raw_count},
                       {"z", result.z},
                       {"tau", result.tau},
                       {"n_exemplars", result.n_exemplars},
                       {"exemplar_boxes", result.exemplar_boxes},
                       {"warning", result.warning ? nlohmann::json(*result.warning) : nlohmann::json()}};
}

}  // namespace cdino
