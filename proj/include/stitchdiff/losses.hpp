#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "stitchdiff/denoiser.hpp"
#include "stitchdiff/image.hpp"
#include "stitchdiff/nn.hpp"
#include "stitchdiff/schedule.hpp"

namespace stitchdiff {

struct LossConfig {
    int ocr_gate_t = 200;
    double weight_vlb = 1.0;
    double weight_mse = 1.0;
    double weight_ocr = 1.0;
    bool masked_mse = false;

    void validate(int T) const {
        require(ocr_gate_t > 0 && ocr_gate_t <= T, Errc::config, "loss: need 0 < ocr_gate_t <= T");
        require(weight_vlb >= 0 && weight_mse >= 0 && weight_ocr >= 0, Errc::config,
                "loss: weights must be >= 0");
    }
};

/// Decomposed loss values plus the gate decision that combined them.
struct LossReport {
    double l_vlb = 0.0;
    double l_mse = 0.0;
    double l_ocr = 0.0;
    double l_total = 0.0;
    bool ocr_active = false;
    bool has_text = false;
    long t = 0;

    /// Assembles the report and re-checks the weighted-sum identity.
    static LossReport make(double vlb, double mse, double ocr, bool active, bool text, long t_,
                           const LossConfig& cfg) {
        LossReport r;
        r.l_vlb = vlb;
        r.l_mse = mse;
        r.l_ocr = active ? ocr : 0.0;
        r.ocr_active = active;
        r.has_text = text;
        r.t = t_;
        r.l_total = cfg.weight_vlb * r.l_vlb + cfg.weight_mse * r.l_mse +
                    (r.ocr_active ? cfg.weight_ocr * r.l_ocr : 0.0);
        const double recheck = cfg.weight_vlb * r.l_vlb + cfg.weight_mse * r.l_mse +
                               (r.ocr_active ? cfg.weight_ocr * r.l_ocr : 0.0);
        require(r.l_total == recheck, Errc::state, "loss report identity violated");
        return r;
    }

    nlohmann::json to_json(long step) const {
        return {{"step", step},     {"t", t},           {"l_vlb", l_vlb},
                {"l_mse", l_mse},   {"l_ocr", l_ocr},   {"l_total", l_total},
                {"ocr_active", ocr_active}, {"has_text", has_text}};
    }
};

/// Simplified variational bound: mean squared error between true and
/// predicted noise.
template <typename S>
double vlb_loss(const Image<S>& eps_true, const Image<S>& eps_hat) {
    check_same_shape(eps_true, eps_hat, "vlb_loss: shape");
    double acc = 0.0;
    long n = 0;
    for (int c = 0; c < eps_true.channels(); ++c) {
        acc += (eps_true.planes[c] - eps_hat.planes[c]).template cast<double>().square().sum();
        n += eps_true.planes[c].size();
    }
    return acc / static_cast<double>(n);
}

/// Mean squared pixel error over the full image.
template <typename S>
double mse_loss(const Image<S>& a, const Image<S>& b) {
    return vlb_loss(a, b);  // same formula; kept as a named operation
}

/// Frozen 3-layer conv feature extractor, seed-pinned. Stands in for a
/// pretrained feature backbone in the OCR-consistency loss and the
/// perceptual metric; only input gradients are ever taken.
template <typename S>
struct FrozenConvNet {
    Conv2d<S> c1, c2, c3;

    static FrozenConvNet make(std::uint64_t seed) {
        FrozenConvNet net;
        Rng rng(seed);
        net.c1.init("frozen.c1", 3, 8, 3, 2, rng, 1.5);
        net.c2.init("frozen.c2", 8, 16, 3, 2, rng, 1.5);
        net.c3.init("frozen.c3", 16, 16, 3, 2, rng, 1.5);
        return net;
    }

    struct Cache {
        typename Conv2d<S>::Cache k1, k2, k3;
        Mat<S> a1, a2;  // tanh outputs (needed for the tanh backward)
        int h = 0, w = 0;
        bool valid = false;
    };

    Mat<S> features(const Image<S>& img, Cache* cache = nullptr) const {
        require(img.channels() == 3, Errc::shape_mismatch, "frozen net expects 3 channels");
        const int h = img.height(), w = img.width();
        require(h >= 4 && w >= 4, Errc::too_small, "frozen net: image too small");
        Mat<S> x = image_to_cols(img);
        const int h1 = conv_out_dim(h, 2), w1 = conv_out_dim(w, 2);
        const int h2 = conv_out_dim(h1, 2), w2 = conv_out_dim(w1, 2);
        Mat<S> a1 = c1.forward(x, 1, h, w, cache ? &cache->k1 : nullptr).array().tanh().matrix();
        Mat<S> a2 = c2.forward(a1, 1, h1, w1, cache ? &cache->k2 : nullptr).array().tanh().matrix();
        Mat<S> f = c3.forward(a2, 1, h2, w2, cache ? &cache->k3 : nullptr);
        if (cache) {
            cache->a1 = std::move(a1);
            cache->a2 = std::move(a2);
            cache->h = h;
            cache->w = w;
            cache->valid = true;
        }
        return f;
    }

    /// dL/d(input image) given dL/d(features). Weights stay frozen: their
    /// accumulated grads are discarded.
    Image<S> input_grad(Cache& cache, const Mat<S>& df) {
        require(cache.valid, Errc::state, "frozen net backward without forward cache");
        Mat<S> d2 = c3.backward(cache.k3, df);
        d2.array() *= (S(1) - cache.a2.array().square());
        Mat<S> d1 = c2.backward(cache.k2, d2);
        d1.array() *= (S(1) - cache.a1.array().square());
        Mat<S> dx = c1.backward(cache.k1, d1);
        c1.W.zero_grad(); c1.b.zero_grad();
        c2.W.zero_grad(); c2.b.zero_grad();
        c3.W.zero_grad(); c3.b.zero_grad();
        return cols_to_image(dx, cache.h, cache.w);
    }
};

template <typename S>
using OcrSurrogate = FrozenConvNet<S>;

/// MSE between frozen-extractor feature maps of the two images.
template <typename S>
double ocr_loss(const Image<S>& x0_hat, const Image<S>& x0_ref, const FrozenConvNet<S>& surrogate) {
    check_same_shape(x0_hat, x0_ref, "ocr_loss: shape");
    Mat<S> fa = surrogate.features(x0_hat);
    Mat<S> fb = surrogate.features(x0_ref);
    return (fa - fb).template cast<double>().array().square().sum() / static_cast<double>(fa.size());
}

template <typename S>
struct ConditionalLossResult {
    LossReport report;
    Image<S> d_eps_hat;  // gradient of the weighted total w.r.t. eps_hat
    Image<S> x0_hat;
};

/// Eq. 9 conditional loss: VLB (noise MSE) + pixel MSE on the reconstructed
/// image + OCR feature loss gated by has_text AND t < ocr_gate_t. Also
/// returns the exact gradient w.r.t. the noise prediction so training can
/// chain into the denoiser.
template <typename S>
ConditionalLossResult<S> conditional_loss_with_grad(const Image<S>& eps_true, const Image<S>& eps_hat,
                                                    const Image<S>& x_t, int t, const Image<S>& x0_ref,
                                                    bool has_text, const LossConfig& cfg,
                                                    const NoiseSchedule& schedule,
                                                    FrozenConvNet<S>& surrogate,
                                                    const Mask* fg_mask = nullptr) {
    schedule.check_t(t, "conditional_loss: t out of range");
    check_same_shape(eps_true, eps_hat, "conditional_loss: eps shape");
    check_same_shape(x_t, eps_hat, "conditional_loss: x_t shape");
    check_same_shape(x_t, x0_ref, "conditional_loss: x0_ref shape");
    cfg.validate(schedule.T);

    const double a = std::sqrt(schedule.alpha_bar(t));
    const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
    const long n = static_cast<long>(x_t.height()) * x_t.width() * x_t.channels();

    // Reconstruction with the pre-clamp values kept for the clamp subgradient.
    Image<S> x0_raw = x_t;
    for (int c = 0; c < x_t.channels(); ++c)
        x0_raw.planes[c] = (x_t.planes[c] - static_cast<S>(b) * eps_hat.planes[c]) / static_cast<S>(a);
    Image<S> x0_hat = x0_raw;
    x0_hat.clamp01();

    const double l_vlb = vlb_loss(eps_true, eps_hat);

    double l_mse = 0.0;
    long mse_n = n;
    if (cfg.masked_mse) {
        require(fg_mask != nullptr, Errc::input, "conditional_loss: masked_mse requires a mask");
        check_mask_fits(x_t, *fg_mask, "conditional_loss: mask shape");
        mse_n = fg_mask->count() * x_t.channels();
        require(mse_n > 0, Errc::empty_mask, "conditional_loss: masked_mse with empty mask");
        for (int c = 0; c < x_t.channels(); ++c)
            l_mse += ((x0_hat.planes[c] - x0_ref.planes[c]) *
                      fg_mask->data.template cast<S>())
                         .template cast<double>()
                         .square()
                         .sum();
        l_mse /= static_cast<double>(mse_n);
    } else {
        l_mse = mse_loss(x0_hat, x0_ref);
    }

    const bool active = has_text && (t < cfg.ocr_gate_t);

    // Gradient w.r.t. x0_hat from the MSE branch.
    Image<S> d_x0 = x0_hat;
    for (int c = 0; c < x_t.channels(); ++c) {
        d_x0.planes[c] = static_cast<S>(2.0 * cfg.weight_mse / static_cast<double>(mse_n)) *
                         (x0_hat.planes[c] - x0_ref.planes[c]);
        if (cfg.masked_mse) d_x0.planes[c] *= fg_mask->data.template cast<S>();
    }

    double l_ocr = 0.0;
    if (active) {
        typename FrozenConvNet<S>::Cache fc;
        Mat<S> fa = surrogate.features(x0_hat, &fc);
        Mat<S> fb = surrogate.features(x0_ref);
        const double m = static_cast<double>(fa.size());
        l_ocr = (fa - fb).template cast<double>().array().square().sum() / m;
        Mat<S> df = static_cast<S>(2.0 * cfg.weight_ocr / m) * (fa - fb);
        Image<S> d_from_ocr = surrogate.input_grad(fc, df);
        for (int c = 0; c < x_t.channels(); ++c) d_x0.planes[c] += d_from_ocr.planes[c];
    }

    // Chain through clamp and the reconstruction, then add the VLB branch.
    ConditionalLossResult<S> res;
    res.d_eps_hat = eps_hat;
    for (int c = 0; c < x_t.channels(); ++c) {
        auto pass = ((x0_raw.planes[c] > S(0)) && (x0_raw.planes[c] < S(1)))
                        .template cast<S>();
        res.d_eps_hat.planes[c] =
            static_cast<S>(2.0 * cfg.weight_vlb / static_cast<double>(n)) *
                (eps_hat.planes[c] - eps_true.planes[c]) +
            d_x0.planes[c] * pass * static_cast<S>(-b / a);
    }
    res.report = LossReport::make(l_vlb, l_mse, l_ocr, active, has_text, t, cfg);
    res.x0_hat = std::move(x0_hat);
    return res;
}

/// Report-only form of the conditional loss.
template <typename S>
LossReport conditional_loss(const Image<S>& eps_true, const Image<S>& eps_hat, const Image<S>& x_t,
                            int t, const Image<S>& x0_ref, bool has_text, const LossConfig& cfg,
                            const NoiseSchedule& schedule, FrozenConvNet<S>& surrogate,
                            const Mask* fg_mask = nullptr) {
    return conditional_loss_with_grad(eps_true, eps_hat, x_t, t, x0_ref, has_text, cfg, schedule,
                                      surrogate, fg_mask)
        .report;
}

}  // namespace stitchdiff
