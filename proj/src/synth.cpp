#include "stitchdiff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "stitchdiff/png_io.hpp"

namespace fs = std::filesystem;

namespace stitchdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Canonical geometry: shapes live in [-1.2, 1.2]^2, pixels map into this
// frame through (translate, scale, rotate)^-1. base half-extent is 0.3 of
// the image size.

bool inside_shape(ShapeId id, double qx, double qy) {
    switch (id) {
        case ShapeId::plate_rect:
            return std::abs(qx) <= 0.9 && std::abs(qy) <= 0.55;
        case ShapeId::bolt_hexagon:
            for (int k = 0; k < 3; ++k) {
                const double a = k * kPi / 3.0;
                if (std::abs(qx * std::cos(a) + qy * std::sin(a)) > 0.75) return false;
            }
            return true;
        case ShapeId::washer_annulus: {
            const double r = std::hypot(qx, qy);
            return r >= 0.35 && r <= 0.8;
        }
        case ShapeId::bracket_l:
            return (qx >= -0.8 && qx <= -0.25 && std::abs(qy) <= 0.8) ||
                   (std::abs(qx) <= 0.8 && qy >= 0.25 && qy <= 0.8);
        case ShapeId::clip_t:
            return (std::abs(qx) <= 0.8 && qy >= -0.8 && qy <= -0.35) ||
                   (std::abs(qx) <= 0.2 && qy > -0.35 && qy <= 0.8);
    }
    return false;
}

/// Farthest canonical point from the origin, for placement bounds.
double shape_radius(ShapeId id) {
    switch (id) {
        case ShapeId::plate_rect: return std::hypot(0.9, 0.55);
        case ShapeId::bolt_hexagon: return 0.75 * 2.0 / std::sqrt(3.0);
        case ShapeId::washer_annulus: return 0.8;
        case ShapeId::bracket_l: return std::hypot(0.8, 0.8);
        case ShapeId::clip_t: return std::hypot(0.8, 0.8);
    }
    return 1.2;
}

struct Rgb {
    double r, g, b;
};

Rgb body_color(ShapeId id) {
    switch (id) {
        case ShapeId::bolt_hexagon: return {0.92, 0.55, 0.25};
        case ShapeId::washer_annulus: return {0.25, 0.92, 0.55};
        case ShapeId::bracket_l: return {0.35, 0.55, 0.95};
        case ShapeId::clip_t: return {0.95, 0.88, 0.30};
        case ShapeId::plate_rect: return {0.90, 0.35, 0.90};
    }
    return {0.9, 0.9, 0.9};
}

/// Shading factor in [0.85, 1]: radial for the annulus (keeps it exactly
/// rotation invariant), canonical-y gradient otherwise (rotates with pose).
double shading(ShapeId id, double qx, double qy) {
    double t;
    if (id == ShapeId::washer_annulus) {
        t = std::clamp((std::hypot(qx, qy) - 0.35) / 0.45, 0.0, 1.0);
    } else {
        t = std::clamp((qy + 1.0) / 2.0, 0.0, 1.0);
    }
    return 0.85 + 0.15 * t;
}

/// Glyph anchor (center of the text box) per shape, chosen on solid body.
void glyph_anchor(ShapeId id, double& ax, double& ay) {
    switch (id) {
        case ShapeId::bolt_hexagon: ax = 0.0; ay = 0.0; break;
        case ShapeId::washer_annulus: ax = 0.0; ay = 0.575; break;
        case ShapeId::bracket_l: ax = 0.0; ay = 0.525; break;
        case ShapeId::clip_t: ax = 0.0; ay = -0.575; break;
        case ShapeId::plate_rect: ax = 0.0; ay = 0.0; break;
    }
}

constexpr double kGlyphCell = 0.34 / 7.0;  // canonical size of one font pixel

bool glyph_hit(const std::string& text, ShapeId shape, double qx, double qy) {
    if (text.empty()) return false;
    double ax, ay;
    glyph_anchor(shape, ax, ay);
    const int n = static_cast<int>(text.size());
    const double total_w = (6.0 * n - 1.0) * kGlyphCell;
    const double x0 = ax - total_w / 2.0, y0 = ay - 3.5 * kGlyphCell;
    const int col = static_cast<int>(std::floor((qx - x0) / kGlyphCell));
    const int row = static_cast<int>(std::floor((qy - y0) / kGlyphCell));
    if (row < 0 || row > 6 || col < 0 || col >= 6 * n) return false;
    const int ci = col / 6, cc = col % 6;
    if (cc == 5) return false;  // inter-character spacing
    const std::uint8_t* g = font5x7(text[static_cast<std::size_t>(ci)]);
    if (!g) return false;
    return (g[cc] >> row) & 1;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double hash01(std::uint64_t seed, int x, int y, int c) {
    std::uint64_t h = seed;
    h ^= static_cast<std::uint64_t>(x + 1) * 0x9e3779b97f4a7c15ull;
    h ^= static_cast<std::uint64_t>(y + 1) * 0xd1b54a32d192ed03ull;
    h ^= static_cast<std::uint64_t>(c + 1) * 0x94d049bb133111ebull;
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

const char kGlyphAlphabet[] = "0123456789ABCDEFGHJKLMNPRSTUVWXYZ";

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io, "cannot open for write: " + path);
    out << text;
    require(out.good(), Errc::io, "short write: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io, "cannot open for read: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

const std::uint8_t* font5x7(char c) {
    // Classic column-encoded 5x7 glyphs; bit 0 = top row.
    static const struct {
        char ch;
        std::uint8_t col[5];
    } kFont[] = {
        {'0', {0x3e, 0x51, 0x49, 0x45, 0x3e}}, {'1', {0x00, 0x42, 0x7f, 0x40, 0x00}},
        {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4b, 0x31}},
        {'4', {0x18, 0x14, 0x12, 0x7f, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
        {'6', {0x3c, 0x4a, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
        {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1e}},
        {'A', {0x7e, 0x11, 0x11, 0x11, 0x7e}}, {'B', {0x7f, 0x49, 0x49, 0x49, 0x36}},
        {'C', {0x3e, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7f, 0x41, 0x41, 0x22, 0x1c}},
        {'E', {0x7f, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7f, 0x09, 0x09, 0x09, 0x01}},
        {'G', {0x3e, 0x41, 0x49, 0x49, 0x7a}}, {'H', {0x7f, 0x08, 0x08, 0x08, 0x7f}},
        {'J', {0x20, 0x40, 0x41, 0x3f, 0x01}}, {'K', {0x7f, 0x08, 0x14, 0x22, 0x41}},
        {'L', {0x7f, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7f, 0x02, 0x0c, 0x02, 0x7f}},
        {'N', {0x7f, 0x04, 0x08, 0x10, 0x7f}}, {'P', {0x7f, 0x09, 0x09, 0x09, 0x06}},
        {'R', {0x7f, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
        {'T', {0x01, 0x01, 0x7f, 0x01, 0x01}}, {'U', {0x3f, 0x40, 0x40, 0x40, 0x3f}},
        {'V', {0x1f, 0x20, 0x40, 0x20, 0x1f}}, {'W', {0x3f, 0x40, 0x38, 0x40, 0x3f}},
        {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
        {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
    };
    for (const auto& e : kFont)
        if (e.ch == c) return e.col;
    return nullptr;
}

const char* shape_name(ShapeId id) {
    switch (id) {
        case ShapeId::bolt_hexagon: return "bolt-hexagon";
        case ShapeId::washer_annulus: return "washer-annulus";
        case ShapeId::bracket_l: return "bracket-L";
        case ShapeId::clip_t: return "clip-T";
        case ShapeId::plate_rect: return "plate-rect";
    }
    return "unknown";
}

ShapeId shape_from_name(const std::string& name) {
    for (int i = 0; i < kShapeCount; ++i)
        if (name == shape_name(static_cast<ShapeId>(i))) return static_cast<ShapeId>(i);
    fail(Errc::input, "unknown shape id: " + name);
}

const char* anomaly_name(Anomaly a) {
    switch (a) {
        case Anomaly::normal: return "normal";
        case Anomaly::missing: return "missing";
        case Anomaly::misposed: return "misposed";
    }
    return "unknown";
}

Anomaly anomaly_from_name(const std::string& name) {
    for (Anomaly a : {Anomaly::normal, Anomaly::missing, Anomaly::misposed})
        if (name == anomaly_name(a)) return a;
    fail(Errc::input, "unknown anomaly kind: " + name);
}

void SceneSpec::validate() const {
    require(pose.rotation_deg >= 0.0 && pose.rotation_deg < 360.0, Errc::input,
            "scene: rotation must be in [0,360)");
    require(pose.scale >= 0.5 && pose.scale <= 1.5, Errc::input, "scene: scale must be in [0.5,1.5]");
    require(glyph.size() <= 3, Errc::input, "scene: glyph must have at most 3 characters");
    for (char c : glyph)
        require(font5x7(c) != nullptr, Errc::input, std::string("scene: unsupported glyph char '") + c + "'");
}

void DatasetConfig::validate() const {
    require(image_size >= 16 && image_size % 4 == 0, Errc::config,
            "dataset: image_size must be >= 16 and divisible by 4");
    require(train_scenes > 0 && test_scenes > 0, Errc::config, "dataset: scene counts must be positive");
    require(reference_views >= 3 && reference_views <= 5, Errc::config,
            "dataset: reference_views must be in [3,5]");
    require(glyph_prob >= 0 && glyph_prob <= 1 && missing_prob >= 0 && misposed_prob >= 0 &&
                missing_prob + misposed_prob <= 1,
            Errc::config, "dataset: probabilities must form a valid mixture");
}

nlohmann::json DatasetConfig::to_json() const {
    return {{"image_size", image_size},   {"train_scenes", train_scenes},
            {"test_scenes", test_scenes}, {"reference_views", reference_views},
            {"glyph_prob", glyph_prob},   {"missing_prob", missing_prob},
            {"misposed_prob", misposed_prob}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.train_scenes = j.at("train_scenes").get<int>();
    c.test_scenes = j.at("test_scenes").get<int>();
    c.reference_views = j.at("reference_views").get<int>();
    c.glyph_prob = j.at("glyph_prob").get<double>();
    c.missing_prob = j.at("missing_prob").get<double>();
    c.misposed_prob = j.at("misposed_prob").get<double>();
    return c;
}

ImageF render_background(int style, int image_size, std::uint64_t seed) {
    Rng rng = Rng(seed).derive("background", static_cast<std::uint64_t>(style));
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniform(0.25, 0.6);
        c1[c] = rng.uniform(0.25, 0.6);
    }
    const double cx = rng.uniform(0.2, 0.8) * image_size;
    const double cy = rng.uniform(0.2, 0.8) * image_size;
    const double period = rng.uniform(6.0, 12.0);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const std::uint64_t noise_seed = rng.next_u64();

    ImageF img(image_size, image_size, 3);
    const double rmax = image_size * 0.75;
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            double t;
            switch (style % 4) {
                case 0: t = static_cast<double>(x) / (image_size - 1); break;
                case 1: t = static_cast<double>(y) / (image_size - 1); break;
                case 2: t = std::clamp(std::hypot(x - cx, y - cy) / rmax, 0.0, 1.0); break;
                default: t = 0.5 + 0.5 * std::sin(2.0 * kPi * (x + y) / period + phase); break;
            }
            for (int c = 0; c < 3; ++c) {
                double v = c0[c] + (c1[c] - c0[c]) * t + 0.06 * (hash01(noise_seed, x, y, c) - 0.5);
                img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.20, 0.65));
            }
        }
    }
    return img;
}

std::pair<ImageF, Mask> render_scene(const SceneSpec& spec, int image_size, std::uint64_t seed) {
    spec.validate();
    ImageF img = render_background(spec.background_style, image_size, seed);
    Mask mask(image_size, image_size, 0);
    if (spec.anomaly == Anomaly::missing) return {std::move(img), std::move(mask)};

    const double base_half = 0.3 * image_size;
    const double cx = image_size / 2.0 + spec.pose.tx;
    const double cy = image_size / 2.0 + spec.pose.ty;
    const double theta = spec.pose.rotation_deg * kPi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double inv_ext = 1.0 / (spec.pose.scale * base_half);
    const Rgb base = body_color(spec.shape);

    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            const double px = ((x + 0.5) - cx) * inv_ext;
            const double py = ((y + 0.5) - cy) * inv_ext;
            const double qx = cs * px + sn * py;
            const double qy = -sn * px + cs * py;
            if (!inside_shape(spec.shape, qx, qy)) continue;
            mask.data(y, x) = 1;
            if (glyph_hit(spec.glyph, spec.shape, qx, qy)) {
                img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = 0.05f;
            } else {
                const double s = shading(spec.shape, qx, qy);
                img.at(y, x, 0) = static_cast<float>(base.r * s);
                img.at(y, x, 1) = static_cast<float>(base.g * s);
                img.at(y, x, 2) = static_cast<float>(base.b * s);
            }
        }
    }

    require(!mask.empty(), Errc::placement, "scene: foreground fell outside the frame");
    for (int i = 0; i < image_size; ++i)
        require(!mask.data(0, i) && !mask.data(image_size - 1, i) && !mask.data(i, 0) &&
                    !mask.data(i, image_size - 1),
                Errc::placement, "scene: foreground clipped by the frame");
    return {std::move(img), std::move(mask)};
}

ReferenceSet<float> make_reference_set(ShapeId shape, int image_size, std::uint64_t seed, int views) {
    require(views >= 3 && views <= 5, Errc::input, "reference set must hold 3-5 views");
    Rng rng = Rng(seed).derive("references", static_cast<std::uint64_t>(shape));
    ReferenceSet<float> refs;
    refs.id = shape_name(shape);
    const double sector = 360.0 / views;
    for (int v = 0; v < views; ++v) {
        SceneSpec spec;
        spec.shape = shape;
        spec.pose.rotation_deg = std::min(v * sector + rng.uniform(0.0, sector * 0.5), 359.999);
        spec.pose.scale = 0.85 + 0.06 * v;  // distinct scales keep symmetric shapes distinct
        spec.pose.tx = spec.pose.ty = 0.0;

        const double base_half = 0.3 * image_size;
        RefView<float> view;
        view.image = ImageF(image_size, image_size, 3, 0.0f);
        view.mask = Mask(image_size, image_size, 0);
        const double theta = spec.pose.rotation_deg * kPi / 180.0;
        const double cs = std::cos(theta), sn = std::sin(theta);
        const double inv_ext = 1.0 / (spec.pose.scale * base_half);
        const Rgb base = body_color(shape);
        for (int y = 0; y < image_size; ++y)
            for (int x = 0; x < image_size; ++x) {
                const double px = ((x + 0.5) - image_size / 2.0) * inv_ext;
                const double py = ((y + 0.5) - image_size / 2.0) * inv_ext;
                const double qx = cs * px + sn * py;
                const double qy = -sn * px + cs * py;
                if (!inside_shape(shape, qx, qy)) continue;
                view.mask.data(y, x) = 1;
                const double s = shading(shape, qx, qy);
                view.image.at(y, x, 0) = static_cast<float>(base.r * s);
                view.image.at(y, x, 1) = static_cast<float>(base.g * s);
                view.image.at(y, x, 2) = static_cast<float>(base.b * s);
            }
        refs.views.push_back(std::move(view));
    }
    refs.validate();
    return refs;
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["config"] = config.to_json();
    j["items"] = nlohmann::json::array();
    for (const auto& it : items) {
        j["items"].push_back({{"id", it.id},
                              {"split", it.split},
                              {"shape", shape_name(it.spec.shape)},
                              {"style", it.spec.background_style},
                              {"glyph", it.spec.glyph},
                              {"anomaly", anomaly_name(it.spec.anomaly)},
                              {"pose",
                               {{"rotation", it.spec.pose.rotation_deg},
                                {"tx", it.spec.pose.tx},
                                {"ty", it.spec.pose.ty},
                                {"scale", it.spec.pose.scale}}},
                              {"image", it.image_path},
                              {"mask", it.mask_path},
                              {"has_text", it.has_text},
                              {"label", it.label}});
    }
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = DatasetConfig::from_json(j.at("config"));
    for (const auto& ij : j.at("items")) {
        ManifestItem it;
        it.id = ij.at("id").get<long>();
        it.split = ij.at("split").get<std::string>();
        it.spec.shape = shape_from_name(ij.at("shape").get<std::string>());
        it.spec.background_style = ij.at("style").get<int>();
        it.spec.glyph = ij.at("glyph").get<std::string>();
        it.spec.anomaly = anomaly_from_name(ij.at("anomaly").get<std::string>());
        it.spec.pose.rotation_deg = ij.at("pose").at("rotation").get<double>();
        it.spec.pose.tx = ij.at("pose").at("tx").get<double>();
        it.spec.pose.ty = ij.at("pose").at("ty").get<double>();
        it.spec.pose.scale = ij.at("pose").at("scale").get<double>();
        it.image_path = ij.at("image").get<std::string>();
        it.mask_path = ij.at("mask").get<std::string>();
        it.has_text = ij.at("has_text").get<bool>();
        it.label = ij.at("label").get<std::string>();
        m.items.push_back(std::move(it));
    }
    return m;
}

std::vector<const ManifestItem*> DatasetManifest::split_items(const std::string& split) const {
    std::vector<const ManifestItem*> out;
    for (const auto& it : items)
        if (it.split == split) out.push_back(&it);
    return out;
}

DatasetManifest build_dataset(const DatasetConfig& cfg, std::uint64_t seed,
                              const std::string& out_dir) {
    cfg.validate();
    Rng root(seed);
    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.config = cfg;

    for (const char* split : {"train", "test"})
        for (const char* kind : {"images", "masks"}) {
            std::error_code ec;
            fs::create_directories(fs::path(out_dir) / split / kind, ec);
            require(!ec, Errc::io, "cannot create dataset directory under " + out_dir);
        }

    const int total = cfg.train_scenes + cfg.test_scenes;
    const double base_half = 0.3 * cfg.image_size;
    for (int i = 0; i < total; ++i) {
        Rng rng = root.derive("scene", static_cast<std::uint64_t>(i));
        SceneSpec spec;
        spec.shape = static_cast<ShapeId>(i % kShapeCount);
        spec.background_style = static_cast<int>(rng.below(4));
        spec.pose.scale = rng.uniform(0.5, 1.25);
        spec.pose.rotation_deg = rng.uniform(0.0, 360.0);
        const double radius = shape_radius(spec.shape) * spec.pose.scale * base_half;
        const double room = std::max(0.0, cfg.image_size / 2.0 - radius - 1.5);
        spec.pose.tx = rng.uniform(-room, room);
        spec.pose.ty = rng.uniform(-room, room);
        if (rng.uniform() < cfg.glyph_prob) {
            const int len = 1 + static_cast<int>(rng.below(3));
            for (int k = 0; k < len; ++k)
                spec.glyph.push_back(kGlyphAlphabet[rng.below(sizeof(kGlyphAlphabet) - 1)]);
        }
        const double au = rng.uniform();
        if (au < cfg.missing_prob) {
            spec.anomaly = Anomaly::missing;
        } else if (au < cfg.missing_prob + cfg.misposed_prob) {
            spec.anomaly = Anomaly::misposed;
            spec.pose.rotation_deg = std::fmod(spec.pose.rotation_deg + 160.0, 360.0);
        }

        const std::uint64_t render_seed = rng.seed_for("render");
        auto [img, mask] = render_scene(spec, cfg.image_size, render_seed);

        ManifestItem item;
        item.id = i;
        item.split = i < cfg.train_scenes ? "train" : "test";
        item.spec = spec;
        item.has_text = !spec.glyph.empty();
        item.label = shape_name(spec.shape);
        char name[16];
        std::snprintf(name, sizeof name, "%04d.png", i);
        item.image_path = item.split + "/images/" + name;
        item.mask_path = item.split + "/masks/" + name;
        write_image_png(out_dir + "/" + item.image_path, img);
        write_mask_png(out_dir + "/" + item.mask_path, mask);
        manifest.items.push_back(std::move(item));
    }

    for (int s = 0; s < kShapeCount; ++s) {
        const ShapeId shape = static_cast<ShapeId>(s);
        ReferenceSet<float> refs =
            make_reference_set(shape, cfg.image_size, seed, cfg.reference_views);
        const fs::path dir = fs::path(out_dir) / "references" / shape_name(shape);
        std::error_code ec;
        fs::create_directories(dir, ec);
        require(!ec, Errc::io, "cannot create reference directory " + dir.string());
        for (std::size_t v = 0; v < refs.views.size(); ++v)
            write_image_png((dir / (std::to_string(v) + ".png")).string(), refs.views[v].image);
    }

    write_text_file(out_dir + "/manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

DatasetManifest load_manifest(const std::string& dataset_dir) {
    const std::string text = read_text_file(dataset_dir + "/manifest.json");
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    require(!j.is_discarded(), Errc::io, "bad manifest JSON in " + dataset_dir);
    return DatasetManifest::from_json(j);
}

namespace {

Mask derive_mask_from_black(const ImageF& img) {
    Mask mask(img.height(), img.width(), 0);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (img.at(y, x, 0) > 0.0f || img.at(y, x, 1) > 0.0f || img.at(y, x, 2) > 0.0f)
                mask.data(y, x) = 1;
    return mask;
}

}  // namespace

ReferenceSet<float> load_reference_set(const std::string& dataset_dir, ShapeId shape) {
    return load_reference_dir(dataset_dir + "/references/" + shape_name(shape));
}

ReferenceSet<float> load_reference_dir(const std::string& dir) {
    require(fs::is_directory(dir), Errc::io, "reference directory missing: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".png") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    require(files.size() >= 3 && files.size() <= 5, Errc::input,
            "reference directory must hold 3-5 view PNGs: " + dir);
    ReferenceSet<float> refs;
    refs.id = fs::path(dir).filename().string();
    for (const auto& f : files) {
        RefView<float> view;
        view.image = read_image_png<float>(f);
        view.mask = derive_mask_from_black(view.image);
        require(!view.mask.empty(), Errc::empty_mask, "reference view is entirely black: " + f);
        refs.views.push_back(std::move(view));
    }
    refs.validate();
    return refs;
}

}  // namespace stitchdiff
