#pragma once

// Independent brute-force oracles for the image operators. These deliberately
// re-derive everything with plain nested loops and explicit kernels so the
// library implementation is checked against a second code path, not itself.

#include <array>
#include <cmath>
#include <vector>

#include "stitchdiff/edges.hpp"
#include "stitchdiff/hog.hpp"
#include "stitchdiff/image.hpp"
#include "stitchdiff/rng.hpp"

namespace oracles {

using stitchdiff::HfConfig;
using stitchdiff::Image;
using stitchdiff::Mask;
using stitchdiff::Rng;

inline double clamp_get(const Image<double>::Plane& p, int y, int x) {
    y = std::clamp(y, 0, static_cast<int>(p.rows()) - 1);
    x = std::clamp(x, 0, static_cast<int>(p.cols()) - 1);
    return p(y, x);
}

inline Image<double>::Plane gray(const Image<double>& img) {
    if (img.channels() == 1) return img.planes[0];
    return (0.299 * img.planes[0] + 0.587 * img.planes[1] + 0.114 * img.planes[2]).eval();
}

constexpr double kSobelScale = 2.0 * 2.23606797749978969;  // 2*sqrt(5)

inline void sobel_xy(const Image<double>::Plane& g, Image<double>::Plane& gx,
                     Image<double>::Plane& gy) {
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    gx.setZero(h, w);
    gy.setZero(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const double v = clamp_get(g, y + i - 1, x + j - 1);
                    gx(y, x) += kx[i][j] * v;
                    gy(y, x) += ky[i][j] * v;
                }
}

inline Image<double> sobel(const Image<double>& img) {
    Image<double>::Plane gx, gy, g = gray(img);
    sobel_xy(g, gx, gy);
    Image<double> out;
    out.planes.push_back(((gx.square() + gy.square()).sqrt() / kSobelScale).eval());
    return out;
}

inline Image<double> laplacian(const Image<double>& img) {
    Image<double>::Plane g = gray(img);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    Image<double>::Plane lap(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            lap(y, x) = clamp_get(g, y - 1, x) + clamp_get(g, y + 1, x) + clamp_get(g, y, x - 1) +
                        clamp_get(g, y, x + 1) - 4.0 * g(y, x);
    Image<double> out;
    out.planes.push_back((lap.abs() / 4.0).eval());
    return out;
}

inline Image<double>::Plane gaussian5x5(const Image<double>::Plane& g) {
    // Full 2D kernel, exp(-(dx^2+dy^2)/2), normalized.
    double k[5][5], sum = 0.0;
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j) {
            k[i + 2][j + 2] = std::exp(-0.5 * (i * i + j * j));
            sum += k[i + 2][j + 2];
        }
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    Image<double>::Plane out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i)
                for (int j = -2; j <= 2; ++j) acc += k[i + 2][j + 2] * clamp_get(g, y + i, x + j);
            out(y, x) = acc / sum;
        }
    return out;
}

inline Image<double> canny(const Image<double>& img, const HfConfig& cfg) {
    Image<double>::Plane g = gaussian5x5(gray(img));
    Image<double>::Plane gx, gy;
    sobel_xy(g, gx, gy);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    Image<double>::Plane mag = ((gx.square() + gy.square()).sqrt() / kSobelScale).eval();

    Image<double>::Plane thin = Image<double>::Plane::Zero(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mag(y, x) <= 0.0) continue;
            double ang = std::atan2(gy(y, x), gx(y, x)) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            int dy0, dx0, dy1, dx1;
            if (ang < 22.5 || ang >= 157.5) { dy0 = 0; dx0 = -1; dy1 = 0; dx1 = 1; }
            else if (ang < 67.5) { dy0 = -1; dx0 = -1; dy1 = 1; dx1 = 1; }
            else if (ang < 112.5) { dy0 = -1; dx0 = 0; dy1 = 1; dx1 = 0; }
            else { dy0 = -1; dx0 = 1; dy1 = 1; dx1 = -1; }
            if (mag(y, x) > clamp_get(mag, y + dy0, x + dx0) &&
                mag(y, x) >= clamp_get(mag, y + dy1, x + dx1))
                thin(y, x) = mag(y, x);
        }

    // Hysteresis by iterating to a fixed point (different route than the
    // implementation's explicit stack walk).
    Image<double>::Plane out = Image<double>::Plane::Zero(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (thin(y, x) >= cfg.canny_high) out(y, x) = 1.0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (out(y, x) == 1.0 || thin(y, x) < cfg.canny_low) continue;
                for (int dy = -1; dy <= 1 && out(y, x) == 0.0; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        if (out(ny, nx) == 1.0) {
                            out(y, x) = 1.0;
                            changed = true;
                            break;
                        }
                    }
            }
    }
    Image<double> res;
    res.planes.push_back(out);
    return res;
}

inline Image<double> high_frequency(const Image<double>& img, const HfConfig& cfg) {
    Image<double>::Plane fused = (cfg.alpha * sobel(img).planes[0] +
                                  cfg.beta * laplacian(img).planes[0] +
                                  cfg.gamma * canny(img, cfg).planes[0])
                                     .eval();
    const double lo = fused.minCoeff(), hi = fused.maxCoeff();
    if (hi > lo)
        fused = ((fused - lo) / (hi - lo)).eval();
    else
        fused.setZero();
    Image<double> out;
    out.planes = {fused, fused, fused};
    return out;
}

/// Per-cell HOG histograms recomputed with direct loops.
inline std::vector<std::vector<std::array<double, 9>>> hog_cells(const Image<double>& img) {
    Image<double>::Plane g = gray(img);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    const int cy = h / 8, cx = w / 8;
    std::vector<std::vector<std::array<double, 9>>> hist(
        static_cast<std::size_t>(cy),
        std::vector<std::array<double, 9>>(static_cast<std::size_t>(cx), std::array<double, 9>{}));
    for (int y = 0; y < cy * 8; ++y)
        for (int x = 0; x < cx * 8; ++x) {
            const double gx = clamp_get(g, y, x + 1) - clamp_get(g, y, x - 1);
            const double gyv = clamp_get(g, y + 1, x) - clamp_get(g, y - 1, x);
            const double mag = std::hypot(gx, gyv);
            if (mag <= 0.0) continue;
            double ang = std::atan2(gyv, gx) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            if (ang >= 180.0) ang -= 180.0;
            int bin = std::min(static_cast<int>(ang / 20.0), 8);
            hist[static_cast<std::size_t>(y / 8)][static_cast<std::size_t>(x / 8)]
                [static_cast<std::size_t>(bin)] += mag;
        }
    return hist;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

inline Image<double> constant_image(int h, int w, double v) { return Image<double>(h, w, 1, v); }

inline Image<double> vertical_step(int h, int w, int col, double lo, double hi) {
    Image<double> img(h, w, 1, lo);
    for (int y = 0; y < h; ++y)
        for (int x = col; x < w; ++x) img.at(y, x, 0) = hi;
    return img;
}

inline Image<double> ramp(int h, int w, double slope_x, double slope_y) {
    Image<double> img(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(y, x, 0) = std::clamp(0.1 + slope_x * x + slope_y * y, 0.0, 1.0);
    return img;
}

inline Image<double> random_smooth(int h, int w, int channels, Rng& rng) {
    // Sum of a few random low-frequency waves, squashed into [0,1].
    Image<double> img(h, w, channels);
    for (int c = 0; c < channels; ++c) {
        const double fx = rng.uniform(0.1, 0.9), fy = rng.uniform(0.1, 0.9);
        const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
        const double amp = rng.uniform(0.2, 0.5);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x, c) =
                    0.5 + amp * std::sin(fx * x + px) * std::cos(fy * y + py);
    }
    img.clamp01();
    return img;
}

/// The 20+ fixture corpus used by the operator oracle suite.
inline std::vector<Image<double>> fixture_corpus() {
    std::vector<Image<double>> out;
    out.push_back(constant_image(8, 8, 0.0));
    out.push_back(constant_image(9, 11, 0.5));
    out.push_back(constant_image(16, 16, 1.0));
    out.push_back(vertical_step(8, 8, 4, 0.0, 1.0));
    out.push_back(vertical_step(16, 16, 5, 0.2, 0.8));
    out.push_back(ramp(12, 12, 0.05, 0.0));
    out.push_back(ramp(16, 16, 0.02, 0.03));
    {
        Image<double> spot(9, 9, 1, 0.0);
        spot.at(4, 4, 0) = 1.0;
        out.push_back(spot);
    }
    {
        Image<double> stripes(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) stripes.at(y, x, 0) = (x / 2) % 2 ? 0.9 : 0.1;
        out.push_back(stripes);
    }
    {
        Image<double> box(16, 16, 1, 0.1);
        for (int y = 5; y < 11; ++y)
            for (int x = 5; x < 11; ++x) box.at(y, x, 0) = 0.9;
        out.push_back(box);
    }
    Rng rng(20240817);
    for (int i = 0; i < 6; ++i) out.push_back(random_smooth(16, 16, 1, rng));
    for (int i = 0; i < 5; ++i) out.push_back(random_smooth(16, 16, 3, rng));
    return out;  // 21 fixtures
}

}  // namespace oracles
