#include "countingdino/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "countingdino/errors.hpp"
#include "countingdino/feature_source.hpp"

namespace cdino {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "test";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ArgumentError("unknown split '" + std::string(name) + "'");
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

constexpr Split kAllSplits[] = {Split::train, Split::val, Split::test};

PixelBox box_from_corners(const nlohmann::json& corners) {
    if (!corners.is_array() || corners.empty()) throw FormatError("box has no corner points");
    PixelBox box{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& pt : corners) {
        if (!pt.is_array() || pt.size() < 2) throw FormatError("corner is not an [x, y] pair");
        const double x = pt[0].get<double>();
        const double y = pt[1].get<double>();
        box.x1 = std::min(box.x1, x);
        box.y1 = std::min(box.y1, y);
        box.x2 = std::max(box.x2, x);
        box.y2 = std::max(box.y2, y);
    }
    if (!box.valid()) throw GeometryError("degenerate exemplar box");
    return box;
}

AnnotationRecord fsc147_record(const std::string& id, const nlohmann::json& entry, Split split) {
    AnnotationRecord rec;
    rec.image_id = id;
    rec.split = split;
    const auto& boxes = entry.at("box_examples_coordinates");
    for (const auto& corners : boxes) rec.exemplar_boxes.push_back(box_from_corners(corners));
    if (rec.exemplar_boxes.empty()) throw FormatError("no exemplar boxes");
    rec.gt_count = static_cast<std::int64_t>(entry.at("points").size());
    return rec;
}

}  // namespace

ParseResult parse_fsc147(const std::filesystem::path& annotation_json,
                         const std::filesystem::path& split_json, std::optional<Split> only) {
    const nlohmann::json annotations = read_json(annotation_json);
    const nlohmann::json splits = read_json(split_json);
    if (!annotations.is_object()) throw FormatError("FSC-147 annotations must be a JSON object");
    if (!splits.is_object()) throw FormatError("FSC-147 split file must be a JSON object");

    ParseResult out;
    for (Split split : kAllSplits) {
        if (only && *only != split) continue;
        const auto key = std::string(to_string(split));
        if (!splits.contains(key)) continue;
        for (const auto& id_json : splits.at(key)) {
            const auto id = id_json.get<std::string>();
            const auto it = annotations.find(id);
            if (it == annotations.end()) {
                out.warnings.push_back({id, "listed in split '" + key + "' but not annotated"});
                continue;
            }
            try {
                out.records.push_back(fsc147_record(id, *it, split));
            } catch (const nlohmann::json::exception& e) {
                out.errors.push_back({id, e.what()});
            } catch (const Error& e) {
                out.errors.push_back({id, e.what()});
            }
        }
    }
    return out;
}

namespace {

std::vector<PixelBox> read_carpk_boxes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PixelBox> boxes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double v[4];
        if (!(ss >> v[0])) continue;  // blank line
        if (!(ss >> v[1] >> v[2] >> v[3])) {
            throw FormatError("line " + std::to_string(line_no) + " has fewer than 4 coordinates");
        }
        const PixelBox box{v[0], v[1], v[2], v[3]};
        if (!box.valid()) throw GeometryError("line " + std::to_string(line_no) + " is a degenerate box");
        boxes.push_back(box);
    }
    return boxes;
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> ids;
    std::string id;
    while (in >> id) ids.push_back(id);
    return ids;
}

std::vector<PixelBox> choose_exemplars(std::vector<PixelBox> boxes, const CarpkOptions& options,
                                       const std::string& image_id) {
    const std::size_t n = std::min(options.exemplar_count, boxes.size());
    if (!options.random_seed) {
        boxes.resize(n);
        return boxes;
    }
    // Mix the image id into the seed so each image draws independently.
    std::seed_seq seq{static_cast<std::uint32_t>(*options.random_seed),
                      static_cast<std::uint32_t>(*options.random_seed >> 32),
                      static_cast<std::uint32_t>(std::hash<std::string>{}(image_id))};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(n);
    std::sort(order.begin(), order.end());
    std::vector<PixelBox> picked;
    for (std::size_t i : order) picked.push_back(boxes[i]);
    return picked;
}

}  // namespace

ParseResult parse_carpk(const std::filesystem::path& root, const CarpkOptions& options,
                        std::optional<Split> only) {
    if (options.exemplar_count == 0) throw ArgumentError("exemplar_count must be >= 1");
    const auto ann_dir = std::filesystem::is_directory(root / "Annotations") ? root / "Annotations" : root;
    if (!std::filesystem::is_directory(ann_dir)) throw IoError("not a directory: " + ann_dir.string());

    std::vector<std::pair<std::string, Split>> listing;
    const auto sets = root / "ImageSets";
    if (std::filesystem::is_directory(sets)) {
        for (Split split : {Split::train, Split::test}) {
            const auto list = sets / (std::string(to_string(split)) + ".txt");
            if (!std::filesystem::exists(list)) continue;
            for (auto& id : read_id_list(list)) listing.emplace_back(std::move(id), split);
        }
    } else {
        std::vector<std::string> ids;
        for (const auto& entry : std::filesystem::directory_iterator(ann_dir)) {
            if (entry.path().extension() == ".txt") ids.push_back(entry.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
        for (auto& id : ids) listing.emplace_back(std::move(id), Split::test);
    }

    ParseResult out;
    for (const auto& [id, split] : listing) {
        if (only && *only != split) continue;
        const auto path = ann_dir / (id + ".txt");
        if (!std::filesystem::exists(path)) {
            out.warnings.push_back({id, "listed in split but has no annotation file"});
            continue;
        }
        try {
            auto boxes = read_carpk_boxes(path);
            if (boxes.empty()) throw FormatError("no boxes, cannot pick exemplars");
            AnnotationRecord rec;
            rec.image_id = id;
            rec.split = split;
            rec.gt_count = static_cast<std::int64_t>(boxes.size());
            rec.exemplar_boxes = choose_exemplars(std::move(boxes), options, id);
            out.records.push_back(std::move(rec));
        } catch (const Error& e) {
            out.errors.push_back({id, e.what()});
        }
    }
    return out;
}

ErrorMetrics compute_metrics(std::span<const double> gt, std::span<const double> pred) {
    if (gt.empty()) throw ArgumentError("metrics need at least one image");
    if (gt.size() != pred.size()) throw ArgumentError("gt and pred differ in length");
    double abs_sum = 0;
    double sq_sum = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double e = gt[i] - pred[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(gt.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

EvalReport evaluate(std::span<const AnnotationRecord> records, const FeatureSource& source,
                    const PipelineConfig& cfg, std::size_t jobs) {
    cfg.validate();
    struct Slot {
        std::optional<double> pred;
        std::string error;
    };
    std::vector<Slot> slots(records.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            const auto& rec = records[i];
            try {
                slots[i].pred = count_image(source, rec.image_id, rec.exemplar_boxes, cfg).count;
            } catch (const std::exception& e) {
                slots[i].error = e.what();
            }
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, std::max<std::size_t>(records.size(), 1));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    EvalReport report;
    report.config = cfg;
    report.n_images = records.size();
    if (!records.empty()) {
        const Split first = records.front().split;
        const bool mixed = std::any_of(records.begin(), records.end(),
                                       [first](const auto& r) { return r.split != first; });
        report.split = mixed ? "mixed" : std::string(to_string(first));
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i].pred) {
            const double gt = static_cast<double>(records[i].gt_count);
            report.per_image.push_back({records[i].image_id, gt, *slots[i].pred,
                                        std::abs(gt - *slots[i].pred)});
        } else {
            report.failures.push_back({records[i].image_id, slots[i].error});
        }
    }
    if (report.per_image.empty()) {
        throw EvaluationError("no image was counted successfully (" +
                              std::to_string(report.failures.size()) + " failures)");
    }

    // Reduce in image-id order so the metrics do not depend on record order.
    std::vector<const ImageOutcome*> ordered;
    for (const auto& o : report.per_image) ordered.push_back(&o);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return std::tie(a->image_id, a->gt, a->pred) < std::tie(b->image_id, b->gt, b->pred);
    });
    std::vector<double> gt, pred;
    for (const auto* o : ordered) {
        gt.push_back(o->gt);
        pred.push_back(o->pred);
    }
    const auto metrics = compute_metrics(gt, pred);
    report.mae = metrics.mae;
    report.rmse = metrics.rmse;
    return report;
}

void to_json(nlohmann::json& j, const RecordIssue& issue) {
    j = nlohmann::json{{"image_id", issue.image_id}, {"error", issue.message}};
}

void from_json(const nlohmann::json& j, RecordIssue& issue) {
    j.at("image_id").get_to(issue.image_id);
    j.at("error").get_to(issue.message);
}

void to_json(nlohmann::json& j, const ImageOutcome& o) {
    j = nlohmann::json{{"image_id", o.image_id}, {"gt", o.gt}, {"pred", o.pred}, {"abs_err", o.abs_err}};
}

void from_json(const nlohmann::json& j, ImageOutcome& o) {
    j.at("image_id").get_to(o.image_id);
    j.at("gt").get_to(o.gt);
    j.at("pred").get_to(o.pred);
    j.at("abs_err").get_to(o.abs_err);
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"split", r.split},         {"n_images", r.n_images}, {"mae", r.mae},
                       {"rmse", r.rmse},           {"per_image", r.per_image},
                       {"config", r.config},       {"failures", r.failures}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
    j.at("split").get_to(r.split);
    j.at("n_images").get_to(r.n_images);
    j.at("mae").get_to(r.mae);
    j.at("rmse").get_to(r.rmse);
    j.at("per_image").get_to(r.per_image);
    j.at("config").get_to(r.config);
    j.at("failures").get_to(r.failures);
}

}  // namespace cdino
