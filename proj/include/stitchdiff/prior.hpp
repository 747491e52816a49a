#pragma once

#include <cmath>
#include <cstdio>

#include "stitchdiff/edges.hpp"
#include "stitchdiff/image.hpp"

namespace stitchdiff {

/// Pose/orientation prior configuration. high_noise_t is the training-phase
/// threshold: the prior fires only for timesteps in the top (T - high_noise_t)
/// band of the schedule.
struct PriorConfig {
    bool enabled = true;
    double lambda = 0.1;
    int high_noise_t = 800;

    void validate(int T) const {
        require(lambda >= 0.0 && lambda <= 1.0, Errc::config, "prior: lambda must be in [0,1]");
        require(high_noise_t > 0 && high_noise_t < T, Errc::config, "prior: need 0 < high_noise_t < T");
    }
};

namespace detail {

/// Variance-preserving blend inside the mask:
///   eps' = sqrt(1-lambda) eps + sqrt(lambda) Z(HF)
/// where Z standardizes the high-frequency map to zero mean / unit variance
/// over mask pixels. Outside the mask eps passes through untouched. A
/// constant HF map (zero variance) falls back to identity with a warning.
template <typename S>
Image<S> fuse_noise_with_hf(const Image<S>& eps, const Image<S>& source, const Mask& mask,
                            double lambda, const HfConfig& hf_cfg) {
    check_mask_fits(eps, mask, "prior: mask/noise shape");
    check_same_shape(eps, source, "prior: source/noise shape");
    if (lambda <= 0.0 || mask.empty()) return eps;

    Image<S> hf = high_frequency(source, hf_cfg);

    // All three HF channels are identical; standardize over mask pixels once.
    const auto& plane = hf.planes[0];
    double sum = 0.0, sum2 = 0.0;
    long n = 0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x)) {
                const double v = static_cast<double>(plane(y, x));
                sum += v;
                sum2 += v * v;
                ++n;
            }
    const double mean = sum / static_cast<double>(n);
    const double var = sum2 / static_cast<double>(n) - mean * mean;
    if (var <= 1e-12) {
        std::fprintf(stderr, "warning: pose prior skipped, high-frequency map constant over mask\n");
        return eps;
    }
    const double inv_sd = 1.0 / std::sqrt(var);
    const S w_eps = static_cast<S>(std::sqrt(1.0 - lambda));
    const S w_hf = static_cast<S>(std::sqrt(lambda));

    Image<S> out = eps;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.data(y, x)) continue;
            const S z = static_cast<S>((static_cast<double>(plane(y, x)) - mean) * inv_sd);
            for (int c = 0; c < eps.channels(); ++c)
                out.at(y, x, c) = w_eps * eps.at(y, x, c) + w_hf * z;
        }
    return out;
}

}  // namespace detail

/// Training-time prior: fuses the high-frequency map of the ground-truth
/// composite's foreground region into the sampled noise during high-noise
/// steps (t >= high_noise_t). Identity otherwise.
template <typename S>
Image<S> fuse_training(const Image<S>& eps, const Image<S>& scene, const Mask& mask,
                       const PriorConfig& cfg, const HfConfig& hf_cfg, int t) {
    if (!cfg.enabled || t < cfg.high_noise_t) return eps;
    return detail::fuse_noise_with_hf(eps, scene, mask, cfg.lambda, hf_cfg);
}

/// Inference-time prior for replacement tasks: the HF map comes from the
/// background's masked region (the object being replaced) and is fused into
/// the initial noise.
template <typename S>
Image<S> fuse_inference(const Image<S>& noise, const Image<S>& background, const Mask& mask,
                        const PriorConfig& cfg, const HfConfig& hf_cfg) {
    if (!cfg.enabled) return noise;
    return detail::fuse_noise_with_hf(noise, background, mask, cfg.lambda, hf_cfg);
}

}  // namespace stitchdiff
