#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "countingdino/errors.hpp"
#include "countingdino/geometry.hpp"
#include "synthetic.hpp"

namespace cdino {
namespace {

constexpr double kQuarterPi = std::numbers::pi / 4.0;

TEST(SnapBox, FloorCeilExamples) {
    EXPECT_EQ(snap_box({20, 7, 49, 30}, 14, 10, 10), (PatchBox{1, 0, 4, 3}));
    EXPECT_EQ(snap_box({0, 0, 14, 14}, 14, 10, 10), (PatchBox{0, 0, 1, 1}));
    EXPECT_EQ(snap_box({15, 15, 16, 16}, 14, 10, 10), (PatchBox{1, 1, 2, 2}));
}

TEST(SnapBox, ClampsToGrid) {
    EXPECT_EQ(snap_box({100, 0, 400, 20}, 14, 4, 10), (PatchBox{7, 0, 10, 2}));
    EXPECT_EQ(snap_box({-5, -5, 10, 10}, 14, 4, 4), (PatchBox{0, 0, 1, 1}));
}

TEST(SnapBox, MalformedOrOffGridIsGeometryError) {
    EXPECT_THROW(snap_box({10, 10, 10, 20}, 14, 4, 4), GeometryError);
    EXPECT_THROW(snap_box({10, 20, 20, 10}, 14, 4, 4), GeometryError);
    EXPECT_THROW(snap_box({0, 0, NAN, 10}, 14, 4, 4), GeometryError);
    EXPECT_THROW(snap_box({100, 100, 120, 120}, 14, 4, 4), GeometryError);
}

TEST(SnapBox, UsesMapGridAndPitch) {
    std::mt19937_64 rng(1);
    const auto map = testing::random_map(rng, 3, 5, 2, 16);
    EXPECT_EQ(snap_box({17, 1, 33, 15}, map), (PatchBox{1, 0, 3, 1}));
}

TEST(SnapBox, CoversEveryPixelAndIsMonotone) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coord(0.0, 200.0);
    std::uniform_real_distribution<double> grow(0.0, 20.0);
    const int p = 14;
    const std::size_t rows = 16, cols = 16;  // 224 px, covers every box below
    for (int trial = 0; trial < 2000; ++trial) {
        double x1 = coord(rng), x2 = coord(rng), y1 = coord(rng), y2 = coord(rng);
        if (x1 > x2) std::swap(x1, x2);
        if (y1 > y2) std::swap(y1, y2);
        if (x2 - x1 < 1e-6 || y2 - y1 < 1e-6) continue;
        const PixelBox box{x1, y1, x2, y2};
        const PatchBox pb = snap_box(box, p, rows, cols);
        ASSERT_LE(pb.col1 * p, x1);
        ASSERT_LE(pb.row1 * p, y1);
        ASSERT_GE(static_cast<double>(pb.col2 * p), x2);
        ASSERT_GE(static_cast<double>(pb.row2 * p), y2);
        ASSERT_GE(pb.width(), 1u);
        ASSERT_GE(pb.height(), 1u);

        const PixelBox bigger{std::max(0.0, x1 - grow(rng)), std::max(0.0, y1 - grow(rng)),
                              std::min(224.0, x2 + grow(rng)), std::min(224.0, y2 + grow(rng))};
        const PatchBox pb2 = snap_box(bigger, p, rows, cols);
        ASSERT_LE(pb2.col1, pb.col1);
        ASSERT_LE(pb2.row1, pb.row1);
        ASSERT_GE(pb2.col2, pb.col2);
        ASSERT_GE(pb2.row2, pb.row2);
    }
}

TEST(EllipseMask, UnitBoxIsQuarterPi) {
    const auto mask = elliptical_mask({0, 0, 1, 1});
    ASSERT_EQ(mask.weights.rows(), 1u);
    EXPECT_NEAR(mask.weights(0, 0), kQuarterPi, 1e-12);
}

TEST(EllipseMask, TwoByTwoIsFourFoldSymmetric) {
    const auto w = elliptical_mask({3, 4, 5, 6}).weights;
    EXPECT_NEAR(w(0, 0), kQuarterPi, 1e-12);
    EXPECT_NEAR(w(0, 0), w(0, 1), 1e-15);
    EXPECT_NEAR(w(0, 0), w(1, 0), 1e-15);
    EXPECT_NEAR(w(0, 0), w(1, 1), 1e-15);
}

TEST(EllipseMask, FourByOneMatchesBruteForceOracle) {
    // 4 cells wide, 1 high.
    const auto w = elliptical_mask({0, 0, 4, 1}).weights;
    const Grid oracle = testing::brute_force_ellipse(1, 4, 1024);
    ASSERT_EQ(w.cols(), 4u);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(w(0, j), oracle(0, j), 2e-5) << j;
    EXPECT_LT(w(0, 0), w(0, 1));
    EXPECT_LT(w(0, 3), w(0, 2));
    EXPECT_DOUBLE_EQ(w(0, 0), w(0, 3));
}

TEST(EllipseMask, MassIsEllipseArea) {
    for (std::size_t h = 1; h <= 7; ++h)
        for (std::size_t w = 1; w <= 7; ++w) {
            const auto mask = elliptical_mask({0, 0, w, h});
            EXPECT_NEAR(mask.weights.sum(), kQuarterPi * double(w * h), 1e-9) << h << "x" << w;
            EXPECT_LE(mask.weights.max(), 1.0);
            EXPECT_GE(mask.weights.min(), 0.0);
        }
}

TEST(EllipseMask, ExactAgreesWithOracleOnRandomBoxes) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const PatchBox box = testing::random_patch_box(rng, 9, 9, 9);
        const auto exact = elliptical_mask(box).weights;
        const Grid oracle = testing::brute_force_ellipse(box.height(), box.width(), 256);
        for (std::size_t i = 0; i < box.height(); ++i)
            for (std::size_t j = 0; j < box.width(); ++j) ASSERT_NEAR(exact(i, j), oracle(i, j), 5e-4);
    }
}

TEST(EllipseMask, SampledModeMatchesFloatingPointSampling) {
    for (int s : {1, 2, 8, 32}) {
        const auto sampled = elliptical_mask({0, 0, 3, 2}, s).weights;
        const Grid oracle = testing::brute_force_ellipse(2, 3, s);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(sampled(i, j), oracle(i, j), 1e-12) << s;
    }
}

TEST(EllipseMask, NegativeSupersampleIsArgumentError) {
    EXPECT_THROW(elliptical_mask({0, 0, 1, 1}, -1), ArgumentError);
}

TEST(UnitDiscRect, KnownAreas) {
    EXPECT_NEAR(unit_disc_rect_area(-1, 1, -1, 1), std::numbers::pi, 1e-12);
    EXPECT_NEAR(unit_disc_rect_area(0, 1, 0, 1), std::numbers::pi / 4, 1e-12);
    EXPECT_NEAR(unit_disc_rect_area(0, 2, -2, 2), std::numbers::pi / 2, 1e-12);
    EXPECT_NEAR(unit_disc_rect_area(2, 3, 0, 1), 0.0, 1e-15);
    // Inscribed square of side sqrt(2) lies fully inside.
    const double h = std::sqrt(0.5);
    EXPECT_NEAR(unit_disc_rect_area(-h, h, -h, h), 2.0, 1e-12);
}

TEST(GlobalMask, SingleCellExemplar) {
    const EllipticalMask m = elliptical_mask({0, 0, 1, 1});
    const Grid g = accumulate_global_mask(std::span(&m, 1), 2, 2);
    EXPECT_NEAR(g(0, 0), kQuarterPi, 1e-12);
    EXPECT_EQ(g(0, 1), 0.0);
    EXPECT_EQ(g(1, 0), 0.0);
    EXPECT_EQ(g(1, 1), 0.0);
}

TEST(GlobalMask, OverlapsAdd) {
    const std::vector<EllipticalMask> masks{elliptical_mask({1, 1, 2, 2}), elliptical_mask({1, 1, 2, 2})};
    const Grid g = accumulate_global_mask(masks, 3, 3);
    EXPECT_NEAR(g(1, 1), 2 * kQuarterPi, 1e-12);
    EXPECT_NEAR(g.sum(), 2 * kQuarterPi, 1e-12);
}

TEST(GlobalMask, EmptyListIsZero) {
    const Grid g = accumulate_global_mask({}, 3, 4);
    EXPECT_EQ(g, Grid(3, 4));
}

TEST(GlobalMask, BoxOutsideIsGeometryError) {
    const EllipticalMask m = elliptical_mask({2, 2, 4, 4});
    EXPECT_THROW(accumulate_global_mask(std::span(&m, 1), 3, 3), GeometryError);
}

TEST(GlobalMask, IsAdditiveAndPermutationInvariant) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<EllipticalMask> masks;
        for (int i = 0; i < 4; ++i) masks.push_back(elliptical_mask(testing::random_patch_box(rng, 8, 9, 5)));
        const Grid all = accumulate_global_mask(masks, 8, 9);
        std::vector<EllipticalMask> reversed(masks.rbegin(), masks.rend());
        const Grid rev = accumulate_global_mask(reversed, 8, 9);
        Grid parts = accumulate_global_mask(std::span(masks).first(2), 8, 9);
        const Grid rest = accumulate_global_mask(std::span(masks).subspan(2), 8, 9);
        for (std::size_t i = 0; i < parts.size(); ++i) parts.values()[i] += rest.values()[i];
        for (std::size_t i = 0; i < all.size(); ++i) {
            ASSERT_NEAR(all.values()[i], rev.values()[i], 1e-12);
            ASSERT_NEAR(all.values()[i], parts.values()[i], 1e-12);
        }
    }
}

TEST(UniformMask, IsAllOnes) {
    const auto m = uniform_mask({1, 2, 4, 3});
    EXPECT_EQ(m.weights, Grid(1, 3, 1.0));
    EXPECT_EQ(m.source, (PatchBox{1, 2, 4, 3}));
}

}  // namespace
}  // namespace cdino
