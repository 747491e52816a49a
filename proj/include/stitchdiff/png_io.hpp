#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stitchdiff/image.hpp"

namespace stitchdiff {

/// Decoded 8-bit PNG payload, row-major interleaved samples.
struct PngBytes {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 or 3 on write; 1/2/3/4 accepted on read
    std::vector<std::uint8_t> data;
};

/// Minimal deterministic PNG codec (8-bit gray/RGB/RGBA, no interlace).
/// Writing always emits filter-0 scanlines at a fixed zlib level, so a given
/// pixel buffer maps to one exact byte stream.
PngBytes png_read(const std::string& path);
void png_write(const std::string& path, const PngBytes& img);

inline std::uint8_t quantize8(double v) {
    double q = std::nearbyint(v * 255.0);
    if (q < 0.0) q = 0.0;
    if (q > 255.0) q = 255.0;
    return static_cast<std::uint8_t>(q);
}

/// Image values map linearly to [0,1]; alpha channels are dropped on read.
template <typename S>
Image<S> read_image_png(const std::string& path) {
    PngBytes raw = png_read(path);
    const int ch = (raw.channels == 4) ? 3 : (raw.channels == 2 ? 1 : raw.channels);
    Image<S> out(raw.height, raw.width, ch);
    const int stride = raw.channels;
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            for (int c = 0; c < ch; ++c)
                out.at(y, x, c) = static_cast<S>(raw.data[(static_cast<std::size_t>(y) * raw.width + x) * stride + c]) / S(255);
    return out;
}

template <typename S>
void write_image_png(const std::string& path, const Image<S>& img) {
    PngBytes raw;
    raw.height = img.height();
    raw.width = img.width();
    raw.channels = img.channels();
    raw.data.resize(static_cast<std::size_t>(raw.height) * raw.width * raw.channels);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            for (int c = 0; c < raw.channels; ++c)
                raw.data[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] =
                    quantize8(static_cast<double>(img.at(y, x, c)));
    png_write(path, raw);
}

/// Masks round-trip as single-channel PNG with the {0,255} convention.
Mask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);

}  // namespace stitchdiff
