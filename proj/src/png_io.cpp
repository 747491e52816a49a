#include "stitchdiff/png_io.hpp"

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>

#include "stitchdiff/error.hpp"

namespace stitchdiff {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::uint8_t* data, std::size_t len) {
    put_u32(out, static_cast<std::uint32_t>(len));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32(out, crc);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, Errc::io, "cannot open for read: " + path);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    std::size_t got = size ? std::fread(buf.data(), 1, buf.size(), f) : 0;
    std::fclose(f);
    require(got == buf.size(), Errc::io, "short read: " + path);
    return buf;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& buf) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    require(f != nullptr, Errc::io, "cannot open for write: " + path);
    std::size_t put = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    require(put == buf.size(), Errc::io, "short write: " + path);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

PngBytes png_read(const std::string& path) {
    std::vector<std::uint8_t> buf = read_file(path);
    require(buf.size() > 8 && std::memcmp(buf.data(), kSignature.data(), 8) == 0, Errc::io,
            "not a PNG file: " + path);

    PngBytes img;
    int bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;

    std::size_t pos = 8;
    while (pos + 12 <= buf.size()) {
        std::uint32_t len = get_u32(&buf[pos]);
        require(pos + 12 + len <= buf.size(), Errc::io, "truncated chunk: " + path);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const std::uint8_t* data = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            require(len == 13, Errc::io, "bad IHDR: " + path);
            img.width = static_cast<int>(get_u32(data));
            img.height = static_cast<int>(get_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            require(data[10] == 0 && data[11] == 0 && data[12] == 0, Errc::io,
                    "unsupported PNG compression/filter/interlace: " + path);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }

    require(bit_depth == 8, Errc::io, "only 8-bit PNG supported: " + path);
    switch (color_type) {
        case 0: img.channels = 1; break;
        case 2: img.channels = 3; break;
        case 4: img.channels = 2; break;
        case 6: img.channels = 4; break;
        default: fail(Errc::io, "unsupported PNG color type: " + path);
    }
    require(img.width > 0 && img.height > 0, Errc::io, "bad PNG dimensions: " + path);

    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels;
    const std::size_t raw_size = (row_bytes + 1) * img.height;
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = static_cast<uLongf>(raw_size);
    int rc = ::uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
    require(rc == Z_OK && dest_len == raw_size, Errc::io, "PNG inflate failed: " + path);

    img.data.assign(static_cast<std::size_t>(img.height) * row_bytes, 0);
    const int bpp = img.channels;  // bytes per pixel at bit depth 8
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (row_bytes + 1)];
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (row_bytes + 1) + 1];
        std::uint8_t* dst = &img.data[static_cast<std::size_t>(y) * row_bytes];
        const std::uint8_t* up = y ? &img.data[static_cast<std::size_t>(y - 1) * row_bytes] : nullptr;
        for (std::size_t i = 0; i < row_bytes; ++i) {
            const int a = (i >= static_cast<std::size_t>(bpp)) ? dst[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail(Errc::io, "bad PNG filter byte: " + path);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

void png_write(const std::string& path, const PngBytes& img) {
    require(img.channels == 1 || img.channels == 3, Errc::input, "png_write: channels must be 1 or 3");
    require(img.width > 0 && img.height > 0, Errc::input, "png_write: empty image");
    require(img.data.size() == static_cast<std::size_t>(img.height) * img.width * img.channels, Errc::input,
            "png_write: data size mismatch");

    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((row_bytes + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: None
        const std::uint8_t* row = &img.data[static_cast<std::size_t>(y) * row_bytes];
        raw.insert(raw.end(), row, row + row_bytes);
    }

    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    int rc = ::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
    require(rc == Z_OK, Errc::io, "PNG deflate failed: " + path);
    compressed.resize(bound);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kSignature.begin(), kSignature.end());

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                 // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);         // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr.data(), ihdr.size());
    append_chunk(out, "IDAT", compressed.data(), compressed.size());
    append_chunk(out, "IEND", nullptr, 0);
    write_file(path, out);
}

Mask read_mask_png(const std::string& path) {
    PngBytes raw = png_read(path);
    Mask mask(raw.height, raw.width);
    const int stride = raw.channels;
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            mask.data(y, x) = raw.data[(static_cast<std::size_t>(y) * raw.width + x) * stride] >= 128 ? 1 : 0;
    return mask;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    PngBytes raw;
    raw.height = mask.height();
    raw.width = mask.width();
    raw.channels = 1;
    raw.data.resize(static_cast<std::size_t>(raw.height) * raw.width);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            raw.data[static_cast<std::size_t>(y) * raw.width + x] = mask.data(y, x) ? 255 : 0;
    png_write(path, raw);
}

}  // namespace stitchdiff
