#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stitchdiff/hog.hpp"
#include "support/oracles.hpp"

using namespace stitchdiff;

namespace {

ImageD rotate90_ccw(const ImageD& img) {
    ImageD out(img.width(), img.height(), img.channels());
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                out.at(img.width() - 1 - x, y, c) = img.at(y, x, c);
    return out;
}

ImageD vertical_stripes(int n) {
    ImageD img(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img.at(y, x, 0) = (x / 2) % 2 ? 0.9 : 0.1;
    return img;
}

}  // namespace

TEST_CASE("hog: constant image renders an all-zero visualization") {
    ImageD vis = hog_texture(ImageD(16, 16, 1, 0.6));
    REQUIRE(vis.channels() == 3);
    for (int c = 0; c < 3; ++c) CHECK(vis.planes[c].maxCoeff() == 0.0);
}

TEST_CASE("hog: image smaller than one cell raises too_small") {
    CHECK_THROWS_WITH_AS(hog_texture(ImageD(7, 16, 1, 0.5)), doctest::Contains("too_small"), Error);
    CHECK_THROWS_WITH_AS(hog_texture(ImageD(16, 5, 1, 0.5)), doctest::Contains("too_small"), Error);
}

TEST_CASE("hog: vertical stripes concentrate energy in the horizontal-gradient bin") {
    ImageD img = vertical_stripes(16);
    auto hist = hog_cell_histograms(img);
    auto want = oracles::hog_cells(img);
    REQUIRE(hist.size() == 2);
    REQUIRE(hist[0].size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t b = 0; b < 9; ++b) {
                CHECK(hist[i][j][b] == doctest::Approx(want[i][j][b]).epsilon(1e-12));
                if (b == 0)
                    CHECK(hist[i][j][b] > 0.0);  // gradients point along x: angle 0
                else
                    CHECK(hist[i][j][b] == 0.0);
            }

    // The rendered glyph for a horizontal-gradient cell is a near-vertical
    // line: more spread across rows than across columns.
    ImageD vis = hog_texture(img);
    const auto& p = vis.planes[0];
    int rows_hit = 0, cols_hit = 0;
    for (int y = 0; y < 8; ++y) {
        bool any = false;
        for (int x = 0; x < 8; ++x) any = any || p(y, x) > 0.0;
        rows_hit += any;
    }
    for (int x = 0; x < 8; ++x) {
        bool any = false;
        for (int y = 0; y < 8; ++y) any = any || p(y, x) > 0.0;
        cols_hit += any;
    }
    CHECK(rows_hit > cols_hit);
    CHECK(rows_hit == 8);
}

TEST_CASE("hog: 90-degree rotation permutes histogram bins (bin-start fixtures)") {
    // Vertical stripes (angle 0, bin 0) rotate into horizontal stripes
    // (angle 90, bin 4); a diagonal ramp (angle 45, bin 2) rotates to bin 6.
    {
        ImageD img = vertical_stripes(16);
        auto orig = hog_cell_histograms(img);
        auto rot = hog_cell_histograms(rotate90_ccw(img));
        for (std::size_t i = 0; i < orig.size(); ++i)
            for (std::size_t j = 0; j < orig[i].size(); ++j) {
                // Stripes are uniform across cells, so any cell pairing works.
                CHECK(rot[i][j][4] == doctest::Approx(orig[i][j][0]).epsilon(1e-9));
                CHECK(rot[i][j][0] == 0.0);
            }
    }
    {
        ImageD img(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) img.at(y, x, 0) = std::clamp(0.03 * (x + y), 0.0, 1.0);
        auto orig = hog_cell_histograms(img);
        auto rot = hog_cell_histograms(rotate90_ccw(img));
        // Interior cell away from clamp saturation and borders.
        CHECK(orig[0][0][2] > 0.0);
        CHECK(rot[1][0][6] == doctest::Approx(orig[0][0][2]).epsilon(1e-9));
    }
}

TEST_CASE("hog: visualization is bounded, max-normalized, and matches the oracle histograms") {
    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        ImageD img = oracles::random_smooth(24, 24, trial % 2 ? 3 : 1, rng);
        auto got = hog_cell_histograms(img);
        auto want = oracles::hog_cells(img);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i)
            for (std::size_t j = 0; j < got[i].size(); ++j)
                for (std::size_t b = 0; b < 9; ++b)
                    max_diff = std::max(max_diff, std::abs(got[i][j][b] - want[i][j][b]));
        CHECK(max_diff < 1e-9);

        ImageD vis = hog_texture(img);
        CHECK(vis.planes[0].minCoeff() >= 0.0);
        CHECK(vis.planes[0].maxCoeff() == doctest::Approx(1.0));
        CHECK((vis.planes[0] == vis.planes[1]).all());
        CHECK((vis.planes[0] == vis.planes[2]).all());
    }
}
