#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "stitchdiff/error.hpp"
#include "stitchdiff/nn.hpp"

namespace stitchdiff {

// Flat tensor file: 16-byte header (4-byte magic "SDTF", u32 version,
// u32 float count, u32 reserved) followed by little-endian 32-bit floats.
// Tensors are concatenated in Eigen's column-major order; a sidecar JSON
// manifest records {name, rows, cols, offset} per tensor for checkpoints.

inline constexpr char kTensorMagic[4] = {'S', 'D', 'T', 'F'};
inline constexpr std::uint32_t kTensorVersion = 1;

struct TensorEntry {
    std::string name;
    long rows = 0;
    long cols = 0;
    long offset = 0;  // in floats, from the start of the payload
};

inline void write_floats(const std::string& path, const std::vector<float>& data) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    require(f != nullptr, Errc::io, "cannot open for write: " + path);
    std::uint8_t header[16] = {};
    std::memcpy(header, kTensorMagic, 4);
    std::uint32_t version = kTensorVersion;
    std::uint32_t count = static_cast<std::uint32_t>(data.size());
    std::memcpy(header + 4, &version, 4);
    std::memcpy(header + 8, &count, 4);
    bool ok = std::fwrite(header, 1, 16, f) == 16;
    if (!data.empty()) ok = ok && std::fwrite(data.data(), 4, data.size(), f) == data.size();
    std::fclose(f);
    require(ok, Errc::io, "short write: " + path);
}

inline std::vector<float> read_floats(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, Errc::io, "cannot open for read: " + path);
    std::uint8_t header[16];
    if (std::fread(header, 1, 16, f) != 16) {
        std::fclose(f);
        fail(Errc::io, "truncated tensor file header: " + path);
    }
    if (std::memcmp(header, kTensorMagic, 4) != 0) {
        std::fclose(f);
        fail(Errc::io, "bad tensor file magic: " + path);
    }
    std::uint32_t version, count;
    std::memcpy(&version, header + 4, 4);
    std::memcpy(&count, header + 8, 4);
    if (version != kTensorVersion) {
        std::fclose(f);
        fail(Errc::io, "unsupported tensor file version: " + path);
    }
    std::vector<float> data(count);
    const std::size_t got = count ? std::fread(data.data(), 4, count, f) : 0;
    std::fclose(f);
    require(got == count, Errc::io, "truncated tensor file payload: " + path);
    return data;
}

template <typename S>
void append_matrix(std::vector<float>& out, const Mat<S>& m) {
    for (long c = 0; c < m.cols(); ++c)
        for (long r = 0; r < m.rows(); ++r) out.push_back(static_cast<float>(m(r, c)));
}

template <typename S>
void read_matrix(const std::vector<float>& data, long offset, Mat<S>& m) {
    require(offset >= 0 && offset + m.size() <= static_cast<long>(data.size()), Errc::io,
            "tensor file too small for matrix payload");
    long i = offset;
    for (long c = 0; c < m.cols(); ++c)
        for (long r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(data[static_cast<std::size_t>(i++)]);
}

/// Writes parameters into <base>.bin with a <base>.json manifest. `meta`
/// rides along in the manifest (config echo, flags).
template <typename S>
void save_params(const std::string& base, const ParamRefs<S>& params,
                 const nlohmann::json& meta = nlohmann::json::object()) {
    std::vector<float> payload;
    nlohmann::json manifest;
    manifest["format"] = "sdtf";
    manifest["version"] = kTensorVersion;
    manifest["meta"] = meta;
    manifest["tensors"] = nlohmann::json::array();
    for (const auto* p : params) {
        manifest["tensors"].push_back({{"name", p->name},
                                       {"rows", p->w.rows()},
                                       {"cols", p->w.cols()},
                                       {"offset", static_cast<long>(payload.size())}});
        append_matrix(payload, p->w);
    }
    write_floats(base + ".bin", payload);

    std::FILE* f = std::fopen((base + ".json").c_str(), "wb");
    require(f != nullptr, Errc::io, "cannot open for write: " + base + ".json");
    const std::string text = manifest.dump(2) + "\n";
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    std::fclose(f);
    require(ok, Errc::io, "short write: " + base + ".json");
}

inline nlohmann::json read_manifest_json(const std::string& base) {
    std::FILE* f = std::fopen((base + ".json").c_str(), "rb");
    require(f != nullptr, Errc::io, "cannot open for read: " + base + ".json");
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
    require(!manifest.is_discarded(), Errc::io, "bad manifest JSON: " + base + ".json");
    return manifest;
}

/// Loads parameters by name from a <base>.bin/<base>.json pair; shapes must
/// match the already-constructed parameter list.
template <typename S>
void load_params(const std::string& base, const ParamRefs<S>& params) {
    std::vector<float> payload = read_floats(base + ".bin");
    nlohmann::json manifest = read_manifest_json(base);

    for (auto* p : params) {
        bool found = false;
        for (const auto& t : manifest.at("tensors")) {
            if (t.at("name").get<std::string>() != p->name) continue;
            require(t.at("rows").get<long>() == p->w.rows() && t.at("cols").get<long>() == p->w.cols(),
                    Errc::io, "tensor shape mismatch for " + p->name);
            read_matrix(payload, t.at("offset").get<long>(), p->w);
            found = true;
            break;
        }
        require(found, Errc::io, "tensor missing from manifest: " + p->name);
    }
}

}  // namespace stitchdiff
