#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stitchdiff/conditioning.hpp"
#include "stitchdiff/image.hpp"

namespace stitchdiff {

// Procedural generator for desk-scale assembly scenes: textured backgrounds,
// a 5-shape component catalog posed by rotation/translation/scale, optional
// glyph markings from a built-in 5x7 font, exact binary masks, and
// train/test splits with a JSON manifest. Rasterization is binary (no
// anti-aliasing) so masks are exact by construction.

enum class ShapeId { bolt_hexagon = 0, washer_annulus, bracket_l, clip_t, plate_rect };
inline constexpr int kShapeCount = 5;

const char* shape_name(ShapeId id);
ShapeId shape_from_name(const std::string& name);

enum class Anomaly { normal = 0, missing, misposed };
const char* anomaly_name(Anomaly a);
Anomaly anomaly_from_name(const std::string& name);

struct ScenePose {
    double rotation_deg = 0.0;  // [0, 360)
    double tx = 0.0;            // center, pixels
    double ty = 0.0;
    double scale = 1.0;         // [0.5, 1.5]
};

struct SceneSpec {
    int background_style = 0;
    ShapeId shape = ShapeId::bolt_hexagon;
    ScenePose pose;
    std::string glyph;  // up to 3 chars from the built-in font; empty = none
    Anomaly anomaly = Anomaly::normal;

    void validate() const;
};

struct DatasetConfig {
    int image_size = 32;
    int train_scenes = 512;
    int test_scenes = 128;
    int reference_views = 5;
    double glyph_prob = 0.5;
    double missing_prob = 0.0;
    double misposed_prob = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

struct ManifestItem {
    long id = 0;
    std::string split;  // "train" | "test"
    SceneSpec spec;
    std::string image_path;  // relative to the dataset root
    std::string mask_path;
    bool has_text = false;
    std::string label;  // shape name
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    DatasetConfig config;
    std::vector<ManifestItem> items;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);

    std::vector<const ManifestItem*> split_items(const std::string& split) const;
};

/// Rasterizes one scene. The seed drives only the deterministic background
/// texture; the foreground is a pure function of the spec.
std::pair<ImageF, Mask> render_scene(const SceneSpec& spec, int image_size, std::uint64_t seed);

/// Background-only render of the same spec (used by mask-exactness checks
/// and by the "missing" anomaly).
ImageF render_background(int style, int image_size, std::uint64_t seed);

/// Renders 3-5 views of a shape on black at distinct rotations (and slightly
/// distinct scales, so rotation-symmetric shapes still give distinct views).
ReferenceSet<float> make_reference_set(ShapeId shape, int image_size, std::uint64_t seed,
                                       int views = 5);

/// Generates the full on-disk dataset under out_dir and returns the manifest
/// (also written to out_dir/manifest.json).
DatasetManifest build_dataset(const DatasetConfig& cfg, std::uint64_t seed,
                              const std::string& out_dir);

DatasetManifest load_manifest(const std::string& dataset_dir);

/// Loads a reference set from dataset_dir/references/<shape>/; masks are
/// derived as any-channel-nonzero (views are rendered on black with all
/// foreground colors floored above zero).
ReferenceSet<float> load_reference_set(const std::string& dataset_dir, ShapeId shape);

/// Loads reference views from an arbitrary directory of PNGs (CLI --refs).
ReferenceSet<float> load_reference_dir(const std::string& dir);

/// 5x7 column-encoded glyph lookup; returns nullptr for unsupported chars.
const std::uint8_t* font5x7(char c);

}  // namespace stitchdiff
