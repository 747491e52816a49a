#pragma once

#include <string>
#include <vector>

#include "stitchdiff/edges.hpp"
#include "stitchdiff/encoder.hpp"
#include "stitchdiff/hog.hpp"
#include "stitchdiff/modulation.hpp"

namespace stitchdiff {

template <typename S>
struct RefView {
    Image<S> image;
    Mask mask;
};

/// 3-5 multi-view images of one foreground subject, each with a mask.
template <typename S>
struct ReferenceSet {
    std::string id;
    std::vector<RefView<S>> views;

    void validate() const {
        require(views.size() >= 3 && views.size() <= 5, Errc::input,
                "reference set must hold 3-5 views");
        for (const auto& v : views)
            require(!v.mask.empty(), Errc::empty_mask, "reference view has an empty mask");
    }
};

/// The three decoupled stream images for one already-cropped view.
template <typename S>
struct StreamImages {
    Image<S> rgb;
    Image<S> hf;
    Image<S> texture;
};

/// Crop to the mask bbox, resize to the encoder input, then decompose.
template <typename S>
StreamImages<S> disentangle(const Image<S>& image, const Mask& mask, const EncoderConfig& enc_cfg,
                            const HfConfig& hf_cfg) {
    Image<S> crop = crop_to_bbox(image, mask);
    Image<S> rgb = resize_bilinear(crop, enc_cfg.image_size, enc_cfg.image_size);
    StreamImages<S> out;
    out.hf = high_frequency(rgb, hf_cfg);
    out.texture = hog_texture(rgb);
    out.rgb = std::move(rgb);
    return out;
}

/// Builds the conditioning bundle for a reference set: every view is cropped,
/// decomposed, and encoded; token sequences are averaged over views per
/// stream. With tfd=false (target-feature-disentanglement ablated) all three
/// slots carry the RGB tokens, so every downstream fusion degenerates to
/// RGB-only conditioning.
template <typename S>
FeatureBundle<S> build_bundle(const ReferenceSet<S>& refs, const EncoderWeights<S>& enc,
                              const HfConfig& hf_cfg, bool tfd = true) {
    refs.validate();
    FeatureBundle<S> bundle;
    bool first = true;
    for (const auto& view : refs.views) {
        Image<S> crop = crop_to_bbox(view.image, view.mask);
        Image<S> rgb = resize_bilinear(crop, enc.cfg.image_size, enc.cfg.image_size);
        TokenSequence<S> t_rgb = encode(rgb, enc);
        TokenSequence<S> t_hf, t_tex;
        if (tfd) {
            t_hf = encode(high_frequency(rgb, hf_cfg), enc);
            t_tex = encode(hog_texture(rgb), enc);
        } else {
            t_hf = t_rgb;
            t_tex = t_rgb;
        }
        if (first) {
            bundle.rgb = std::move(t_rgb);
            bundle.hf = std::move(t_hf);
            bundle.texture = std::move(t_tex);
            first = false;
        } else {
            bundle.rgb.tokens += t_rgb.tokens;
            bundle.hf.tokens += t_hf.tokens;
            bundle.texture.tokens += t_tex.tokens;
        }
    }
    const S inv = S(1) / static_cast<S>(refs.views.size());
    bundle.rgb.tokens *= inv;
    bundle.hf.tokens *= inv;
    bundle.texture.tokens *= inv;
    return bundle;
}

}  // namespace stitchdiff
