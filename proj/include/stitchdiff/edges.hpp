#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "stitchdiff/image.hpp"

namespace stitchdiff {

/// Weights and thresholds for the high-frequency fusion map. alpha/beta/gamma
/// weight the Sobel/Laplacian/Canny responses; the Canny thresholds apply to
/// gradient magnitudes already rescaled into [0,1].
struct HfConfig {
    double alpha = 1.0;
    double beta = 0.5;
    double gamma = 0.5;
    double canny_low = 0.1;
    double canny_high = 0.3;

    void validate() const {
        require(alpha >= 0 && beta >= 0 && gamma >= 0, Errc::config, "hf weights must be >= 0");
        require(alpha + beta + gamma > 0, Errc::config, "hf weights must not all be zero");
        require(canny_low >= 0 && canny_low < canny_high && canny_high <= 1, Errc::config,
                "canny thresholds must satisfy 0 <= low < high <= 1");
    }
};

namespace detail {

/// Replicate-padded pixel fetch.
template <typename P>
auto pix(const P& p, int y, int x) {
    const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return p(y, x);
}

/// Raw Sobel gradients (unit-range input gives |gx|,|gy| <= 4).
template <typename S>
std::pair<typename Image<S>::Plane, typename Image<S>::Plane> sobel_gradients(
    const typename Image<S>::Plane& g) {
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    typename Image<S>::Plane gx(h, w), gy(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const S tl = pix(g, y - 1, x - 1), tc = pix(g, y - 1, x), tr = pix(g, y - 1, x + 1);
            const S ml = pix(g, y, x - 1), mr = pix(g, y, x + 1);
            const S bl = pix(g, y + 1, x - 1), bc = pix(g, y + 1, x), br = pix(g, y + 1, x + 1);
            gx(y, x) = (tr + S(2) * mr + br) - (tl + S(2) * ml + bl);
            gy(y, x) = (bl + S(2) * bc + br) - (tl + S(2) * tc + tr);
        }
    }
    return {std::move(gx), std::move(gy)};
}

/// Gaussian blur, sigma 1.0, 5x5 kernel, replicate padding. Used by Canny.
template <typename S>
typename Image<S>::Plane gaussian5(const typename Image<S>::Plane& g) {
    // Separable 1D kernel exp(-i^2/2), normalized.
    std::array<S, 5> k;
    S sum = S(0);
    for (int i = -2; i <= 2; ++i) {
        k[static_cast<std::size_t>(i + 2)] = static_cast<S>(std::exp(-0.5 * i * i));
        sum += k[static_cast<std::size_t>(i + 2)];
    }
    for (auto& v : k) v /= sum;

    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    typename Image<S>::Plane tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            S acc = S(0);
            for (int i = -2; i <= 2; ++i) acc += k[static_cast<std::size_t>(i + 2)] * pix(g, y, x + i);
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            S acc = S(0);
            for (int i = -2; i <= 2; ++i) acc += k[static_cast<std::size_t>(i + 2)] * pix(tmp, y + i, x);
            out(y, x) = acc;
        }
    return out;
}

}  // namespace detail

/// Maximum of sqrt(gx^2+gy^2) for Sobel on inputs in [0,1]; attained by a
/// corner step (gx=4, gy=2 up to symmetry), so outputs divide by 2*sqrt(5).
template <typename S>
constexpr S sobel_max() {
    return static_cast<S>(2.0 * 2.23606797749978969);
}

/// Sobel gradient magnitude, rescaled to [0,1]. RGB input is converted to
/// grayscale first.
template <typename S>
Image<S> sobel(const Image<S>& image) {
    auto g = grayscale(image);
    auto [gx, gy] = detail::sobel_gradients<S>(g);
    Image<S> out;
    out.planes.push_back(((gx * gx + gy * gy).sqrt() / sobel_max<S>()).eval());
    return out;
}

/// 4-neighbor Laplacian, absolute value, rescaled to [0,1] (kernel max 4).
template <typename S>
Image<S> laplacian(const Image<S>& image) {
    auto g = grayscale(image);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    typename Image<S>::Plane lap(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            lap(y, x) = detail::pix(g, y - 1, x) + detail::pix(g, y + 1, x) + detail::pix(g, y, x - 1) +
                        detail::pix(g, y, x + 1) - S(4) * g(y, x);
    Image<S> out;
    out.planes.push_back((lap.abs() / S(4)).eval());
    return out;
}

/// Canny edge map: Gaussian blur (sigma 1.0, 5x5), Sobel gradients,
/// non-maximum suppression along the quantized gradient direction, then
/// double-threshold hysteresis (8-connected). Output is binary {0,1}.
///
/// NMS keeps a pixel when its magnitude is strictly greater than the
/// preceding neighbor and >= the following one, which thins the two-pixel
/// plateau a discrete step edge produces down to one pixel.
template <typename S>
Image<S> canny(const Image<S>& image, const HfConfig& cfg) {
    cfg.validate();
    auto g = detail::gaussian5<S>(grayscale(image));
    auto [gx, gy] = detail::sobel_gradients<S>(g);
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());

    typename Image<S>::Plane mag = ((gx * gx + gy * gy).sqrt() / sobel_max<S>()).eval();

    // Non-maximum suppression over 4 direction sectors.
    typename Image<S>::Plane thin(h, w);
    thin.setZero();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const S m = mag(y, x);
            if (m <= S(0)) continue;
            double ang = std::atan2(static_cast<double>(gy(y, x)), static_cast<double>(gx(y, x))) * 180.0 /
                         3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            int dy0, dx0, dy1, dx1;
            if (ang < 22.5 || ang >= 157.5) {
                dy0 = 0; dx0 = -1; dy1 = 0; dx1 = 1;          // gradient ~horizontal
            } else if (ang < 67.5) {
                dy0 = -1; dx0 = -1; dy1 = 1; dx1 = 1;         // ~45 deg (y down)
            } else if (ang < 112.5) {
                dy0 = -1; dx0 = 0; dy1 = 1; dx1 = 0;          // ~vertical
            } else {
                dy0 = -1; dx0 = 1; dy1 = 1; dx1 = -1;         // ~135 deg
            }
            const S prev = detail::pix(mag, y + dy0, x + dx0);
            const S next = detail::pix(mag, y + dy1, x + dx1);
            if (m > prev && m >= next) thin(y, x) = m;
        }
    }

    // Double threshold + hysteresis from strong pixels.
    Image<S> out(h, w, 1, S(0));
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (thin(y, x) >= static_cast<S>(cfg.canny_high)) {
                out.planes[0](y, x) = S(1);
                stack.emplace_back(y, x);
            }
    while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                if (out.planes[0](ny, nx) == S(0) && thin(ny, nx) >= static_cast<S>(cfg.canny_low)) {
                    out.planes[0](ny, nx) = S(1);
                    stack.emplace_back(ny, nx);
                }
            }
    }
    return out;
}

/// Weighted fusion of the three edge responses, min-max normalized to [0,1]
/// (an all-zero fusion stays all-zero) and replicated to 3 channels.
template <typename S>
Image<S> high_frequency(const Image<S>& image, const HfConfig& cfg) {
    cfg.validate();
    typename Image<S>::Plane fused =
        (static_cast<S>(cfg.alpha) * sobel(image).planes[0] +
         static_cast<S>(cfg.beta) * laplacian(image).planes[0] +
         static_cast<S>(cfg.gamma) * canny(image, cfg).planes[0])
            .eval();
    const S lo = fused.minCoeff(), hi = fused.maxCoeff();
    if (hi > lo) {
        fused = ((fused - lo) / (hi - lo)).eval();
    } else {
        fused.setZero();
    }
    return replicate3<S>(fused);
}

}  // namespace stitchdiff
