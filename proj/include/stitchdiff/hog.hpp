#pragma once

#include <cmath>
#include <vector>

#include "stitchdiff/image.hpp"

namespace stitchdiff {

inline constexpr int kHogCell = 8;
inline constexpr int kHogBins = 9;  // unsigned orientations, 20 degrees per bin

/// Per-cell orientation histograms: gradients from central differences with
/// replicate padding, magnitudes hard-binned by floor(angle/20) over the
/// unsigned range [0,180). Returned as cells_y x cells_x rows of 9 bins.
template <typename S>
std::vector<std::vector<std::array<double, kHogBins>>> hog_cell_histograms(const Image<S>& image) {
    auto g = grayscale(image);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    require(h >= kHogCell && w >= kHogCell, Errc::too_small, "hog: image smaller than one 8x8 cell");

    const int cy = h / kHogCell, cx = w / kHogCell;
    std::vector<std::vector<std::array<double, kHogBins>>> hist(
        static_cast<std::size_t>(cy), std::vector<std::array<double, kHogBins>>(
                                          static_cast<std::size_t>(cx), std::array<double, kHogBins>{}));

    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return static_cast<double>(g(y, x));
    };
    for (int y = 0; y < cy * kHogCell; ++y) {
        for (int x = 0; x < cx * kHogCell; ++x) {
            const double gx = at(y, x + 1) - at(y, x - 1);
            const double gy = at(y + 1, x) - at(y - 1, x);
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag <= 0.0) continue;
            double ang = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            if (ang >= 180.0) ang -= 180.0;
            int bin = static_cast<int>(ang / 20.0);
            if (bin >= kHogBins) bin = kHogBins - 1;
            hist[static_cast<std::size_t>(y / kHogCell)][static_cast<std::size_t>(x / kHogCell)]
                [static_cast<std::size_t>(bin)] += mag;
        }
    }
    return hist;
}

/// HOG star-glyph visualization: for every cell and bin, a line through the
/// cell center along the edge direction (bin center + 90 degrees), with
/// intensity accumulating the bin weight. The map is then rescaled so the
/// maximum is 1 (a zero map stays zero) and replicated to 3 channels.
template <typename S>
Image<S> hog_texture(const Image<S>& image) {
    auto hist = hog_cell_histograms(image);
    const int h = image.height(), w = image.width();
    const int cy = static_cast<int>(hist.size());
    const int cx = cy ? static_cast<int>(hist[0].size()) : 0;

    typename Image<S>::Plane canvas(h, w);
    canvas.setZero();
    const double radius = kHogCell / 2.0 - 0.5;
    for (int i = 0; i < cy; ++i) {
        for (int j = 0; j < cx; ++j) {
            const double ccy = i * kHogCell + (kHogCell - 1) / 2.0;
            const double ccx = j * kHogCell + (kHogCell - 1) / 2.0;
            for (int b = 0; b < kHogBins; ++b) {
                const double wgt = hist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                                       [static_cast<std::size_t>(b)];
                if (wgt <= 0.0) continue;
                const double edge_ang = ((b + 0.5) * 20.0 + 90.0) * 3.14159265358979323846 / 180.0;
                const double dx = std::cos(edge_ang), dy = std::sin(edge_ang);
                // 16 samples across the cell diameter, nearest-pixel raster.
                for (int s = 0; s <= 15; ++s) {
                    const double t = -radius + s * (2.0 * radius / 15.0);
                    const int py = static_cast<int>(std::lround(ccy + t * dy));
                    const int px = static_cast<int>(std::lround(ccx + t * dx));
                    if (py >= 0 && py < h && px >= 0 && px < w)
                        canvas(py, px) += static_cast<S>(wgt);
                }
            }
        }
    }

    const S hi = canvas.maxCoeff();
    if (hi > S(0)) canvas /= hi;
    return replicate3<S>(canvas);
}

}  // namespace stitchdiff
