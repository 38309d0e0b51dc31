// Synthetic inputs and independent oracles shared by the unit tests, the
// acceptance suite and the benchmarks.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "countingdino/feature_map.hpp"
#include "countingdino/feature_source.hpp"
#include "countingdino/geometry.hpp"
#include "countingdino/grid.hpp"
#include "countingdino/matching.hpp"

namespace cdino::testing {

/// Map with i.i.d. normal features and exact geometry.
FeatureMap random_map(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                      std::size_t channels, int patch_size = 14);

/// Map whose cells are given row-major, each a `channels`-vector.
FeatureMap map_from_cells(std::size_t rows, std::size_t cols, std::size_t channels,
                          std::vector<float> data, int patch_size = 14);

Grid random_grid(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

/// Random PatchBox that fits a rows x cols grid, with sides <= max_side.
PatchBox random_patch_box(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                          std::size_t max_side);

/// Planted-object scene: `n_objects` copies of a side x side pattern whose
/// cells are distinct basis vectors, on a background basis vector that is
/// orthogonal to all of them. `noise` adds Gaussian values on channels not
/// used by pattern or background, so exact orthogonality is kept between
/// pattern and background directions.
struct PlantedScene {
    FeatureMap map;
    std::vector<PixelBox> objects;  ///< pixel boxes, slightly inset from cell borders
    std::vector<PatchBox> cells;    ///< the object footprints on the grid
};

struct PlantedOptions {
    std::size_t side = 3;
    std::size_t gap = 1;
    std::size_t channels = 16;
    int patch_size = 14;
    double noise = 0.0;
};

PlantedScene planted_scene(std::size_t n_objects, std::uint64_t seed, const PlantedOptions& opts = {});

/// Per-patch mock backbone: each patch token is the mean and the max of the
/// RGB values in the patch (D = 6), preceded by one class token holding the
/// tile mean. Receptive field is the patch itself, so tiling is exact.
class PatchMeanBackbone final : public Backbone {
public:
    explicit PatchMeanBackbone(int patch_size = 14) : patch_(patch_size) {}
    int patch_size() const override { return patch_; }
    std::size_t channels() const override { return 6; }
    std::size_t prefix_tokens() const override { return 1; }
    std::vector<float> forward(const RgbImage& tile) const override;

private:
    int patch_;
};

RgbImage random_image(std::mt19937_64& rng, std::size_t height, std::size_t width);

// ---- oracles ---------------------------------------------------------------

/// Brute-force point-sampled ellipse coverage with `samples` x `samples`
/// floating-point sample centres per cell.
Grid brute_force_ellipse(std::size_t height, std::size_t width, int samples);

/// Direct quadruple-loop "same" cross-correlation with explicit bounds
/// checks; written independently of correlate().
Grid brute_force_correlation(const FeatureMap& map, const ExemplarKernel& kernel);

}  // namespace cdino::testing
