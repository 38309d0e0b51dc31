#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "countingdino/baseline.hpp"
#include "countingdino/errors.hpp"
#include "countingdino/eval.hpp"
#include "countingdino/feature_map.hpp"
#include "countingdino/feature_source.hpp"
#include "countingdino/pipeline.hpp"
#include "countingdino/tensorio.hpp"

namespace cdino::cli {

namespace {

struct BoxFlags {
    std::string inline_boxes;
    std::string boxes_file;
};

struct PipelineFlags {
    std::optional<int> k;
    bool no_ellipse = false;
    bool no_threshold = false;
    bool normalize_features = false;
    std::size_t exemplars = 3;
    int supersample = kDefaultSupersample;
    std::string degenerate = "zero";
};

struct Options {
    std::string features;
    std::string features_dir;
    BoxFlags boxes;
    PipelineFlags pipeline;
    bool json = false;
    int decimals = 1;
    std::string out_dir;
    std::string name;

    // eval
    std::string dataset;
    std::string split = "test";
    std::string ann;
    std::string splits;
    std::size_t jobs = 0;
    std::string report;
    std::size_t carpk_exemplars = 3;
    std::optional<std::uint64_t> carpk_seed;

    // baseline
    std::string detections;
    std::string image_id;
    double threshold = kDefaultBaselineThreshold;
};

void add_box_flags(CLI::App* app, BoxFlags& flags) {
    auto* inl = app->add_option("--boxes", flags.inline_boxes,
                                "Exemplar boxes as \"x1,y1,x2,y2;x1,y1,x2,y2;...\"");
    auto* file = app->add_option("--boxes-file", flags.boxes_file,
                                 "JSON file with [[x1,y1,x2,y2], ...]");
    inl->excludes(file);
}

void add_pipeline_flags(CLI::App* app, PipelineFlags& flags) {
    app->add_option("--k", flags.k, "Resolution level (4^k quadrants)")->check(CLI::Range(0, 15));
    app->add_flag("--no-ellipse", flags.no_ellipse, "Use all-ones exemplar masks");
    app->add_flag("--no-threshold", flags.no_threshold, "Integrate without the unit-count threshold");
    app->add_flag("--normalize-features", flags.normalize_features,
                  "L2-normalize feature vectors before correlation");
    app->add_option("--exemplars", flags.exemplars, "Maximum number of exemplars used")
        ->check(CLI::PositiveNumber);
    app->add_option("--supersample", flags.supersample,
                    "Ellipse mask: 0 = exact cell coverage, N = N x N point samples per cell")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--degenerate", flags.degenerate,
                    "On constant similarity maps: 'error' fails, 'zero' reports count 0")
        ->check(CLI::IsMember({"error", "zero"}));
}

PipelineConfig make_config(const PipelineFlags& flags, int default_level) {
    PipelineConfig cfg;
    cfg.resolution_level = flags.k.value_or(default_level);
    cfg.apply_ellipse = !flags.no_ellipse;
    cfg.apply_threshold = !flags.no_threshold;
    cfg.normalize_features = flags.normalize_features;
    cfg.supersample = flags.supersample;
    cfg.max_exemplars = flags.exemplars;
    cfg.degenerate_policy =
        flags.degenerate == "error" ? DegeneratePolicy::error : DegeneratePolicy::zero_count;
    return cfg;
}

std::vector<PixelBox> resolve_boxes(const BoxFlags& flags) {
    if (!flags.inline_boxes.empty()) return parse_inline_boxes(flags.inline_boxes);
    if (!flags.boxes_file.empty()) return read_boxes_file(flags.boxes_file);
    throw ArgumentError("one of --boxes or --boxes-file is required");
}

std::string fixed(double v, int decimals) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(decimals) << v;
    return ss.str();
}

/// Loads a single feature file and checks an explicit --k against it.
FeatureMap load_checked(const std::string& path, const PipelineFlags& flags) {
    FeatureMap map = load_feature_map(path);
    if (flags.k && *flags.k != map.resolution_level()) {
        throw ArgumentError(path + " holds resolution level " +
                            std::to_string(map.resolution_level()) + " but --k " +
                            std::to_string(*flags.k) + " was given");
    }
    return map;
}

std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

int cmd_count(const Options& o, std::ostream& out, std::ostream& err) {
    const auto boxes = resolve_boxes(o.boxes);
    const FeatureMap map = load_checked(o.features, o.pipeline);
    PipelineConfig cfg = make_config(o.pipeline, map.resolution_level());
    cfg.keep_density = !o.out_dir.empty();

    const CountResult result = count_features(map, boxes, cfg, stem_of(o.features));
    if (result.warning) err << "warning: " << *result.warning << '\n';
    if (!o.out_dir.empty()) {
        std::filesystem::create_directories(o.out_dir);
        export_density(result, std::filesystem::path(o.out_dir) / result.image_id);
    }
    if (o.json) {
        out << nlohmann::json(result).dump(2) << '\n';
    } else {
        out << "count " << fixed(result.count, o.decimals) << '\n'
            << "raw_count " << fixed(result.raw_count, o.decimals) << '\n'
            << "exemplars " << result.n_exemplars << '\n';
    }
    return kExitOk;
}

int cmd_export_density(const Options& o, std::ostream& out, std::ostream& err) {
    const auto boxes = resolve_boxes(o.boxes);
    const FeatureMap map = load_checked(o.features, o.pipeline);
    PipelineConfig cfg = make_config(o.pipeline, map.resolution_level());
    cfg.keep_density = true;
    const std::string name = o.name.empty() ? stem_of(o.features) : o.name;
    const CountResult result = count_features(map, boxes, cfg, name);
    if (result.warning) err << "warning: " << *result.warning << '\n';
    std::filesystem::create_directories(o.out_dir);
    const auto stem = std::filesystem::path(o.out_dir) / name;
    export_density(result, stem);
    if (o.json) {
        out << nlohmann::json(result).dump(2) << '\n';
    } else {
        out << "wrote " << stem.string() << "{,_raw}.{csv,png}\n";
    }
    return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
    const FeatureMap map = load_feature_map(o.features);
    double norm_sum = 0, norm_min = INFINITY, norm_max = 0;
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            double n2 = 0;
            for (float v : map.cell(r, c)) n2 += double(v) * v;
            const double n = std::sqrt(n2);
            norm_sum += n;
            norm_min = std::min(norm_min, n);
            norm_max = std::max(norm_max, n);
        }
    }
    const auto& g = map.geometry();
    const nlohmann::json info{
        {"path", o.features},
        {"version", kCdfmVersion},
        {"patch_size", map.patch_size()},
        {"rows", map.rows()},
        {"cols", map.cols()},
        {"channels", map.channels()},
        {"image_height", g.height},
        {"image_width", g.width},
        {"effective_height", g.effective_height},
        {"effective_width", g.effective_width},
        {"resolution_level", map.resolution_level()},
        {"cell_norm", {{"min", norm_min},
                       {"max", norm_max},
                       {"mean", norm_sum / static_cast<double>(map.rows() * map.cols())}}}};
    if (o.json) {
        out << info.dump(2) << '\n';
    } else {
        out << o.features << ": CDFM v" << kCdfmVersion << ", " << map.rows() << "x" << map.cols()
            << "x" << map.channels() << " cells, patch " << map.patch_size() << ", image "
            << g.height << "x" << g.width << " (effective " << g.effective_height << "x"
            << g.effective_width << "), k=" << map.resolution_level() << '\n';
    }
    return kExitOk;
}

int cmd_baseline(const Options& o, std::ostream& out, std::ostream& err) {
    const auto boxes = resolve_boxes(o.boxes);
    const FeatureMap map = load_feature_map(o.features);
    map.validate();
    const auto all = load_detections(o.detections);
    std::string id = o.image_id;
    if (id.empty()) {
        if (all.size() == 1) {
            id = all.begin()->first;
        } else {
            const std::string stem = stem_of(o.features);
            id = all.count(stem) ? stem : stem + ".jpg";
        }
    }
    const auto it = all.find(id);
    if (it == all.end()) throw ArgumentError("no detections for image '" + id + "' in " + o.detections);

    const auto proto = prototype(map, boxes);
    const BaselineResult result = filter_count(map, it->second, proto, o.threshold);
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    if (o.json) {
        nlohmann::json sims = nlohmann::json::array();
        for (const auto& s : result.similarities) sims.push_back(s ? nlohmann::json(*s) : nlohmann::json());
        out << nlohmann::json{{"image_id", id},
                              {"count", result.count},
                              {"threshold", o.threshold},
                              {"n_detections", it->second.boxes.size()},
                              {"similarities", sims}}
                   .dump(2)
            << '\n';
    } else {
        out << "count " << result.count << " of " << it->second.boxes.size() << " detections\n";
    }
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    const Split split = parse_split(o.split);
    ParseResult parsed;
    if (o.dataset == "fsc147") {
        if (o.splits.empty()) throw ArgumentError("--splits is required for fsc147");
        parsed = parse_fsc147(o.ann, o.splits, split);
    } else {
        CarpkOptions carpk;
        carpk.exemplar_count = o.carpk_exemplars;
        carpk.random_seed = o.carpk_seed;
        parsed = parse_carpk(o.ann, carpk, split);
    }
    for (const auto& w : parsed.warnings) err << "warning: " << w.image_id << ": " << w.message << '\n';

    const PipelineConfig cfg = make_config(o.pipeline, PipelineConfig{}.resolution_level);
    const FileSource source(o.features_dir);
    EvalReport report;
    try {
        report = evaluate(parsed.records, source, cfg, o.jobs);
    } catch (const EvaluationError&) {
        if (parsed.records.empty() && parsed.errors.empty()) {
            throw EvaluationError("split '" + o.split + "' has no annotated images");
        }
        throw;
    }
    report.split = o.split;
    for (const auto& e : parsed.errors) report.failures.push_back(e);
    report.n_images += parsed.errors.size();

    const nlohmann::json doc = report;
    if (!o.report.empty()) {
        std::ofstream f(o.report);
        if (!f) throw IoError("cannot open " + o.report + " for writing");
        f << doc.dump(2) << '\n';
    }
    for (const auto& f : report.failures) err << "failed: " << f.image_id << ": " << f.message << '\n';
    if (o.json) {
        out << doc.dump(2) << '\n';
    } else {
        out << o.dataset << " " << report.split << ": " << report.per_image.size() << "/"
            << report.n_images << " images, MAE " << fixed(report.mae, 2) << ", RMSE "
            << fixed(report.rmse, 2) << '\n';
    }
    return report.failures.empty() ? kExitOk : kExitFailure;
}

}  // namespace

std::vector<PixelBox> parse_inline_boxes(std::string_view text) {
    std::vector<PixelBox> boxes;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(';', start), text.size());
        const std::string item(text.substr(start, end - start));
        start = end + 1;
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        double v[4];
        char tail = 0;
        if (std::sscanf(item.c_str(), " %lf , %lf , %lf , %lf %c", &v[0], &v[1], &v[2], &v[3], &tail) != 4) {
            throw ArgumentError("cannot parse box '" + item + "', expected x1,y1,x2,y2");
        }
        const PixelBox box{v[0], v[1], v[2], v[3]};
        if (!box.valid()) throw ArgumentError("box '" + item + "' is empty or inverted");
        boxes.push_back(box);
    }
    if (boxes.empty()) throw ArgumentError("no boxes given");
    return boxes;
}

std::vector<PixelBox> read_boxes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    const nlohmann::json& list = doc.is_object() ? doc.at("boxes") : doc;
    std::vector<PixelBox> boxes;
    for (const auto& b : list) {
        if (!b.is_array() || b.size() != 4) throw FormatError(path + ": box is not [x1, y1, x2, y2]");
        const PixelBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        if (!box.valid()) throw ArgumentError(path + ": box is empty or inverted");
        boxes.push_back(box);
    }
    if (boxes.empty()) throw ArgumentError(path + ": no boxes");
    return boxes;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Training-free exemplar-based object counting on dense patch features", "cdino"};
    app.require_subcommand(1);
    Options o;

    auto* count = app.add_subcommand("count", "Count objects in one image from its feature file");
    count->add_option("--features", o.features, "CDFM feature file")->required()->check(CLI::ExistingFile);
    add_box_flags(count, o.boxes);
    add_pipeline_flags(count, o.pipeline);
    count->add_flag("--json", o.json, "Print the result as JSON");
    count->add_option("--decimals", o.decimals, "Decimals in the printed count")->check(CLI::Range(0, 12));
    count->add_option("--out", o.out_dir, "Write density CSV/PNG into this directory");

    auto* eval = app.add_subcommand("eval", "Evaluate a dataset split and report MAE/RMSE");
    eval->add_option("--dataset", o.dataset, "fsc147 or carpk")
        ->required()
        ->check(CLI::IsMember({"fsc147", "carpk"}));
    eval->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--features-dir", o.features_dir, "Directory of CDFM files")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--ann", o.ann, "FSC-147 annotation JSON or CARPK root")->required()->check(CLI::ExistingPath);
    eval->add_option("--splits", o.splits, "FSC-147 split JSON")->check(CLI::ExistingFile);
    add_pipeline_flags(eval, o.pipeline);
    eval->add_option("--jobs", o.jobs, "Worker threads (default: logical CPUs)");
    eval->add_option("--report", o.report, "Also write the JSON report to this file");
    eval->add_option("--carpk-exemplars", o.carpk_exemplars, "Exemplars per CARPK image")
        ->check(CLI::PositiveNumber);
    eval->add_option("--carpk-seed", o.carpk_seed, "Pick CARPK exemplars at random with this seed");
    eval->add_flag("--json", o.json, "Print the report as JSON");

    auto* inspect = app.add_subcommand("inspect", "Print the header of a CDFM feature file");
    inspect->add_option("--features", o.features, "CDFM feature file")->required()->check(CLI::ExistingFile);
    inspect->add_flag("--json", o.json, "Print as JSON");

    auto* baseline = app.add_subcommand("baseline", "Count detections similar to the exemplar prototype");
    baseline->add_option("--features", o.features, "CDFM feature file")->required()->check(CLI::ExistingFile);
    add_box_flags(baseline, o.boxes);
    baseline->add_option("--detections", o.detections, "Detections JSON")->required()->check(CLI::ExistingFile);
    baseline->add_option("--image-id", o.image_id, "Key in the detections file");
    baseline->add_option("--threshold", o.threshold, "Cosine similarity threshold")->check(CLI::Range(-1.0, 1.0));
    baseline->add_flag("--json", o.json, "Print as JSON");

    auto* export_cmd = app.add_subcommand("export-density", "Write pre/post-threshold density maps");
    export_cmd->add_option("--features", o.features, "CDFM feature file")->required()->check(CLI::ExistingFile);
    add_box_flags(export_cmd, o.boxes);
    add_pipeline_flags(export_cmd, o.pipeline);
    export_cmd->add_option("--out", o.out_dir, "Output directory")->required();
    export_cmd->add_option("--name", o.name, "File stem (default: feature file stem)");
    export_cmd->add_flag("--json", o.json, "Print the count result as JSON");

    std::vector<const char*> argv{"cdino"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitUsage;
    }

    try {
        if (count->parsed()) return cmd_count(o, out, err);
        if (eval->parsed()) return cmd_eval(o, out, err);
        if (inspect->parsed()) return cmd_inspect(o, out);
        if (baseline->parsed()) return cmd_baseline(o, out, err);
        if (export_cmd->parsed()) return cmd_export_density(o, out, err);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace cdino::cli
