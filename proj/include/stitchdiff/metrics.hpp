#pragma once

#include <cmath>

#include "stitchdiff/conditioning.hpp"
#include "stitchdiff/encoder.hpp"
#include "stitchdiff/image.hpp"
#include "stitchdiff/losses.hpp"

namespace stitchdiff {

/// Mean local SSIM with an 8x8 Gaussian window (sigma 1.5) over fully-valid
/// window positions, standard constants k1=0.01, k2=0.03, dynamic range 1.
/// Multi-channel images average the per-channel scores.
template <typename S>
double ssim(const Image<S>& a, const Image<S>& b, int window = 8, double k1 = 0.01,
            double k2 = 0.03) {
    check_same_shape(a, b, "ssim: shape");
    const int h = a.height(), w = a.width();
    require(h >= window && w >= window, Errc::too_small, "ssim: image smaller than the window");

    // Normalized Gaussian window weights.
    std::vector<double> wts(static_cast<std::size_t>(window) * window);
    const double center = (window - 1) / 2.0;
    double wsum = 0.0;
    for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
            const double d2 = (i - center) * (i - center) + (j - center) * (j - center);
            wts[static_cast<std::size_t>(i) * window + j] = std::exp(-d2 / (2.0 * 1.5 * 1.5));
            wsum += wts[static_cast<std::size_t>(i) * window + j];
        }
    for (auto& v : wts) v /= wsum;

    const double c1 = k1 * k1, c2 = k2 * k2;
    double total = 0.0;
    long count = 0;
    for (int ch = 0; ch < a.channels(); ++ch) {
        for (int y = 0; y + window <= h; ++y) {
            for (int x = 0; x + window <= w; ++x) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < window; ++i)
                    for (int j = 0; j < window; ++j) {
                        const double wt = wts[static_cast<std::size_t>(i) * window + j];
                        const double va = a.at(y + i, x + j, ch);
                        const double vb = b.at(y + i, x + j, ch);
                        mu_a += wt * va;
                        mu_b += wt * vb;
                        aa += wt * va * va;
                        bb += wt * vb * vb;
                        ab += wt * va * vb;
                    }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

struct MaskedMetrics {
    double ssim = 0.0;
    double perceptual = 0.0;
};

/// Replaces mask-1 pixels in both images with a fixed neutral value, then
/// computes SSIM plus the frozen-net perceptual distance. Foreground content
/// can therefore never influence the scores.
template <typename S>
MaskedMetrics masked_background_metrics(const Image<S>& generated, const Image<S>& background,
                                        const Mask& mask, const FrozenConvNet<S>& perceptual_net,
                                        double neutral = 0.5) {
    check_same_shape(generated, background, "masked metrics: shape");
    check_mask_fits(generated, mask, "masked metrics: mask shape");
    Image<S> g = generated, b = background;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x))
                for (int c = 0; c < g.channels(); ++c) {
                    g.at(y, x, c) = static_cast<S>(neutral);
                    b.at(y, x, c) = static_cast<S>(neutral);
                }
    MaskedMetrics out;
    out.ssim = ssim(g, b);
    Mat<S> fg = perceptual_net.features(g);
    Mat<S> fb = perceptual_net.features(b);
    out.perceptual =
        (fg - fb).template cast<double>().array().square().sum() / static_cast<double>(fg.size());
    return out;
}

/// Foreground identity: crop the generated foreground by its mask, encode,
/// and average the cosine similarity against every cropped reference view.
template <typename S>
double identity_similarity(const Image<S>& generated, const Mask& gen_mask,
                           const ReferenceSet<S>& refs, const EncoderWeights<S>& encoder) {
    require(!gen_mask.empty(), Errc::empty_mask, "identity_similarity: empty generated mask");
    refs.validate();
    TokenSequence<S> gen_tokens = encode(crop_to_bbox(generated, gen_mask), encoder);
    double acc = 0.0;
    for (const auto& view : refs.views) {
        TokenSequence<S> ref_tokens = encode(crop_to_bbox(view.image, view.mask), encoder);
        acc += similarity(gen_tokens, ref_tokens);
    }
    return acc / static_cast<double>(refs.views.size());
}

}  // namespace stitchdiff
