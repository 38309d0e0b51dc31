#include "countingdino/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "countingdino/errors.hpp"
#include "countingdino/feature_map.hpp"

namespace cdino {

std::map<std::string, DetectionSet> load_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw FormatError("detections file must map image ids to box lists");

    std::map<std::string, DetectionSet> out;
    for (const auto& [id, boxes] : doc.items()) {
        DetectionSet set;
        set.image_id = id;
        if (!boxes.is_array()) throw FormatError("detections for '" + id + "' are not a list");
        for (const auto& det : boxes) {
            if (!det.is_array() || (det.size() != 4 && det.size() != 5)) {
                throw FormatError("detection in '" + id + "' is not [x1, y1, x2, y2, score?]");
            }
            const PixelBox box{det[0].get<double>(), det[1].get<double>(), det[2].get<double>(),
                               det[3].get<double>()};
            if (!box.valid()) throw GeometryError("degenerate detection box in '" + id + "'");
            set.boxes.push_back(box);
            set.scores.push_back(det.size() == 5 ? std::optional<double>(det[4].get<double>())
                                                 : std::nullopt);
        }
        out.emplace(id, std::move(set));
    }
    return out;
}

std::vector<double> pooled_feature(const FeatureMap& map, const PixelBox& box) {
    const PatchBox cells = snap_box(box, map);
    std::vector<double> sum(map.channels(), 0.0);
    for (std::size_t r = cells.row1; r < cells.row2; ++r) {
        for (std::size_t c = cells.col1; c < cells.col2; ++c) {
            const auto f = map.cell(r, c);
            for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += f[d];
        }
    }
    const double n = static_cast<double>(cells.area());
    for (auto& v : sum) v /= n;
    return sum;
}

std::vector<double> prototype(const FeatureMap& map, std::span<const PixelBox> exemplars) {
    if (exemplars.empty()) throw ArgumentError("prototype needs at least one exemplar");
    std::vector<double> proto(map.channels(), 0.0);
    for (const auto& box : exemplars) {
        const auto pooled = pooled_feature(map, box);
        for (std::size_t d = 0; d < proto.size(); ++d) proto[d] += pooled[d];
    }
    const double n = static_cast<double>(exemplars.size());
    for (auto& v : proto) v /= n;
    return proto;
}

std::optional<double> cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine similarity of vectors of different length");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0 || nb <= 0) return std::nullopt;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::size_t count_above(std::span<const std::optional<double>> similarities, double threshold) {
    std::size_t n = 0;
    for (const auto& s : similarities) {
        if (s && *s > threshold) ++n;
    }
    return n;
}

BaselineResult filter_count(const FeatureMap& map, const DetectionSet& detections,
                            std::span<const double> proto, double threshold) {
    if (!(threshold >= -1.0 && threshold <= 1.0)) {
        throw ArgumentError("similarity threshold must lie in [-1, 1]");
    }
    if (proto.size() != map.channels()) throw ShapeError("prototype length does not match the map");

    BaselineResult out;
    for (std::size_t i = 0; i < detections.boxes.size(); ++i) {
        std::optional<double> sim;
        try {
            sim = cosine_similarity(pooled_feature(map, detections.boxes[i]), proto);
            if (!sim) {
                out.warnings.push_back("detection " + std::to_string(i) + " of '" +
                                       detections.image_id + "' has a zero feature, skipped");
            }
        } catch (const GeometryError& e) {
            out.warnings.push_back("detection " + std::to_string(i) + " of '" +
                                   detections.image_id + "' skipped: " + e.what());
        }
        out.similarities.push_back(sim);
    }
    out.count = count_above(out.similarities, threshold);
    return out;
}

}  // namespace cdino
