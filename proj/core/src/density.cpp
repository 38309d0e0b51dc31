#include "countingdino/density.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "countingdino/errors.hpp"

namespace cdino {

ExemplarSet::ExemplarSet(std::vector<PatchBox> boxes) : boxes_(std::move(boxes)) {
    if (boxes_.empty()) throw ArgumentError("exemplar set is empty");
    for (const auto& b : boxes_) {
        if (b.area() == 0) throw GeometryError("exemplar box has zero area");
    }
}

std::size_t ExemplarSet::total_area() const noexcept {
    std::size_t total = 0;
    for (const auto& b : boxes_) total += b.area();
    return total;
}

std::size_t ExemplarSet::largest_area() const noexcept {
    std::size_t best = 0;
    for (const auto& b : boxes_) best = std::max(best, b.area());
    return best;
}

SimilarityMap minmax(const SimilarityMap& map) {
    const double lo = map.values.min();
    const double hi = map.values.max();
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw ValidationError("similarity map has non-finite values");
    }
    if (!(hi > lo)) throw DegenerateMapError("similarity map is constant");
    const double range = hi - lo;
    SimilarityMap out = map;
    for (auto& v : out.values.values()) v = (v - lo) / range;
    return out;
}

double normalization_factor(const SimilarityMap& s01, const Grid& global_mask, std::size_t n) {
    if (n == 0) throw ArgumentError("normalization needs at least one exemplar");
    if (!s01.values.same_shape(global_mask)) {
        throw ShapeError("global mask does not match the similarity map");
    }
    const auto s = s01.values.values();
    const auto m = global_mask.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += m[i] * s[i];
    const double z = acc / static_cast<double>(n);
    if (!(z > kMinNormalization)) {
        throw DegenerateNormalizationError("exemplar regions carry no response (z = " +
                                           std::to_string(z) + ")");
    }
    return z;
}

DensityMap normalize(const SimilarityMap& s01, double z) {
    if (!(z > 0) || !std::isfinite(z)) throw ArgumentError("normalization factor must be > 0");
    DensityMap out;
    out.values = s01.values;
    for (auto& v : out.values.values()) v /= z;
    out.z = z;
    out.raw_count = out.values.sum();
    out.count = out.raw_count;
    return out;
}

double unit_count(const ExemplarSet& boxes) {
    return static_cast<double>(boxes.size()) / static_cast<double>(boxes.total_area());
}

DensityMap threshold_and_count(DensityMap density, const ExemplarSet& boxes) {
    density.tau = 1.0 / static_cast<double>(boxes.largest_area());
    for (auto& v : density.values.values()) {
        if (v < density.tau) v = 0.0;
    }
    density.count = density.values.sum();
    return density;
}

}  // namespace cdino
