#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "stitchdiff/error.hpp"
#include "stitchdiff/rng.hpp"

namespace stitchdiff {

/// Dense H x W x C pixel grid with values in [0,1]. Channels are stored as
/// separate Eigen planes (rows = y, cols = x) so per-channel operators stay
/// expression-friendly. C is 1 (grayscale) or 3 (RGB).
template <typename S>
struct Image {
    using Plane = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<Plane> planes;

    Image() = default;
    Image(int height, int width, int channels, S fill = S(0)) {
        planes.assign(static_cast<std::size_t>(channels), Plane::Constant(height, width, fill));
    }

    int height() const { return planes.empty() ? 0 : static_cast<int>(planes[0].rows()); }
    int width() const { return planes.empty() ? 0 : static_cast<int>(planes[0].cols()); }
    int channels() const { return static_cast<int>(planes.size()); }

    S& at(int y, int x, int c) { return planes[static_cast<std::size_t>(c)](y, x); }
    S at(int y, int x, int c) const { return planes[static_cast<std::size_t>(c)](y, x); }

    bool same_shape(const Image& o) const {
        return height() == o.height() && width() == o.width() && channels() == o.channels();
    }

    Image& clamp01() {
        for (auto& p : planes) p = p.min(S(1)).max(S(0));
        return *this;
    }

    template <typename T>
    Image<T> cast() const {
        Image<T> out;
        out.planes.reserve(planes.size());
        for (const auto& p : planes) out.planes.push_back(p.template cast<T>());
        return out;
    }
};

/// Binary {0,1} grid annotating an image of the same spatial shape.
struct Mask {
    using Plane = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

    Plane data;

    Mask() = default;
    Mask(int height, int width, std::uint8_t fill = 0) : data(Plane::Constant(height, width, fill)) {}

    int height() const { return static_cast<int>(data.rows()); }
    int width() const { return static_cast<int>(data.cols()); }
    long count() const { return static_cast<long>(data.template cast<long>().sum()); }
    bool empty() const { return count() == 0; }
};

template <typename S>
void check_same_shape(const Image<S>& a, const Image<S>& b, const char* where) {
    require(a.same_shape(b), Errc::shape_mismatch, where);
}

template <typename S>
void check_mask_fits(const Image<S>& img, const Mask& mask, const char* where) {
    require(img.height() == mask.height() && img.width() == mask.width(), Errc::shape_mismatch, where);
}

/// Rec.601 luminance; returns the single plane unchanged for grayscale input.
template <typename S>
typename Image<S>::Plane grayscale(const Image<S>& img) {
    if (img.channels() == 1) return img.planes[0];
    require(img.channels() == 3, Errc::shape_mismatch, "grayscale: expected 1 or 3 channels");
    return (S(0.299) * img.planes[0] + S(0.587) * img.planes[1] + S(0.114) * img.planes[2]).eval();
}

/// Minimal axis-aligned rectangle containing every mask-1 pixel. Pixels
/// inside the rectangle but outside the mask come back black.
template <typename S>
Image<S> crop_to_bbox(const Image<S>& image, const Mask& mask) {
    check_mask_fits(image, mask, "crop_to_bbox: mask/image size");
    require(!mask.empty(), Errc::empty_mask, "crop_to_bbox: mask has no foreground pixel");

    int y0 = mask.height(), y1 = -1, x0 = mask.width(), x1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.data(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
        }
    }

    Image<S> out(y1 - y0 + 1, x1 - x0 + 1, image.channels(), S(0));
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (mask.data(y, x)) out.at(y - y0, x - x0, c) = image.at(y, x, c);
            }
        }
    }
    return out;
}

/// Same crop for the mask itself.
inline Mask crop_mask_to_bbox(const Mask& mask) {
    require(!mask.empty(), Errc::empty_mask, "crop_mask_to_bbox: empty mask");
    int y0 = mask.height(), y1 = -1, x0 = mask.width(), x1 = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    Mask out(y1 - y0 + 1, x1 - x0 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.data(y - y0, x - x0) = mask.data(y, x);
    return out;
}

/// Bilinear resize with half-pixel centers (align_corners = false).
template <typename S>
Image<S> resize_bilinear(const Image<S>& img, int out_h, int out_w) {
    require(out_h > 0 && out_w > 0, Errc::input, "resize_bilinear: output size must be positive");
    const int h = img.height(), w = img.width();
    Image<S> out(out_h, out_w, img.channels());
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels(); ++c) {
                const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                                 wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
                out.at(y, x, c) = static_cast<S>(v);
            }
        }
    }
    return out;
}

/// Nearest-neighbor resize for masks (keeps values binary).
inline Mask resize_nearest(const Mask& mask, int out_h, int out_w) {
    Mask out(out_h, out_w);
    const int h = mask.height(), w = mask.width();
    for (int y = 0; y < out_h; ++y) {
        int sy = std::min(static_cast<int>((y + 0.5) * h / out_h), h - 1);
        for (int x = 0; x < out_w; ++x) {
            int sx = std::min(static_cast<int>((x + 0.5) * w / out_w), w - 1);
            out.data(y, x) = mask.data(sy, sx);
        }
    }
    return out;
}

/// Replicate a single plane into a 3-channel image (the R(.) operator).
template <typename S>
Image<S> replicate3(const typename Image<S>::Plane& plane) {
    Image<S> out;
    out.planes = {plane, plane, plane};
    return out;
}

/// i.i.d. standard-normal image of the given shape; used as diffusion noise.
template <typename S>
Image<S> noise_like(int height, int width, int channels, Rng& rng) {
    Image<S> out(height, width, channels);
    // Fixed channel-major, row-major traversal keeps the stream layout stable.
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(y, x, c) = static_cast<S>(rng.normal());
    return out;
}

template <typename S>
S max_abs_diff(const Image<S>& a, const Image<S>& b) {
    check_same_shape(a, b, "max_abs_diff");
    S m = S(0);
    for (int c = 0; c < a.channels(); ++c) m = std::max(m, (a.planes[c] - b.planes[c]).abs().maxCoeff());
    return m;
}

using ImageF = Image<float>;
using ImageD = Image<double>;

}  // namespace stitchdiff
