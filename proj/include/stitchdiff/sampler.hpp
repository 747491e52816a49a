#pragma once

#include <map>
#include <vector>

#include "stitchdiff/conditioning.hpp"
#include "stitchdiff/denoiser.hpp"
#include "stitchdiff/prior.hpp"
#include "stitchdiff/schedule.hpp"

namespace stitchdiff {

/// One composition task: generate foreground content inside the placement
/// mask of the background, conditioned on a reference set. For replacement
/// tasks the mask region of the background contains the object being
/// replaced, which also feeds the inference-time pose prior.
template <typename S>
struct GenerationRequest {
    Image<S> background;
    Mask mask;
    ReferenceSet<S> refs;
    std::uint64_t seed = 0;
    PriorConfig prior;
    HfConfig hf;

    void validate() const {
        require(background.height() == mask.height() && background.width() == mask.width(),
                Errc::shape_mismatch, "generation request: mask dims must match background");
    }
};

/// Conditioning policy for ablations: use_tfd=false keeps only the RGB
/// stream; use_tm=false replaces timestep modulation with the uniform
/// stream mean.
struct SampleOptions {
    bool use_tfd = true;
    bool use_tm = true;
};

/// Full ancestral DDPM loop with per-step background re-imposition outside
/// the mask. Requests in one batch are independent: each consumes its own
/// seeded noise streams, so batching never changes a request's output.
/// Condition tokens are computed once per distinct reference-set id per
/// timestep.
template <typename S>
std::vector<Image<S>> sample_batch(const std::vector<GenerationRequest<S>>& reqs,
                                   const Denoiser<S>& model, const NoiseSchedule& schedule,
                                   const ModulationNet<S>& modulation,
                                   const EncoderWeights<S>& encoder,
                                   const SampleOptions& opts = {}) {
    require(model.trained, Errc::state, "sample: model has not been trained");
    require(!reqs.empty(), Errc::input, "sample: empty request batch");
    const int batch = static_cast<int>(reqs.size());
    const int h = reqs[0].background.height(), w = reqs[0].background.width();
    const int ch = reqs[0].background.channels();

    // One bundle per distinct reference-set id.
    std::map<std::string, int> group_of;
    std::vector<FeatureBundle<S>> bundles;
    std::vector<int> group(static_cast<std::size_t>(batch));
    std::vector<Rng> rngs;
    std::vector<Image<S>> x(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const auto& req = reqs[static_cast<std::size_t>(b)];
        req.validate();
        require(req.background.height() == h && req.background.width() == w &&
                    req.background.channels() == ch,
                Errc::shape_mismatch, "sample: all requests in a batch must share image shape");
        req.prior.validate(schedule.T);
        auto [it, inserted] = group_of.try_emplace(req.refs.id, static_cast<int>(bundles.size()));
        if (inserted) bundles.push_back(build_bundle(req.refs, encoder, req.hf, opts.use_tfd));
        group[static_cast<std::size_t>(b)] = it->second;

        Rng rng(req.seed);
        rngs.push_back(rng.derive("sampler"));
        Image<S> init = noise_like<S>(h, w, ch, rngs.back());
        x[static_cast<std::size_t>(b)] =
            fuse_inference(init, req.background, req.mask, req.prior, req.hf);
    }

    Mat<S> xs(ch, static_cast<long>(batch) * h * w);
    const long hw = static_cast<long>(h) * w;
    for (int t = schedule.T - 1; t >= 0; --t) {
        std::vector<Mat<S>> group_conds;
        if (opts.use_tm) {
            TimestepEmbedding<S> h_t = embed_timestep(t, modulation);
            for (const auto& bundle : bundles)
                group_conds.push_back(modulate(bundle, h_t, modulation, modulation.cfg.mod_alpha,
                                               modulation.cfg.mod_beta)
                                          .tokens);
        } else {
            for (const auto& bundle : bundles)
                group_conds.push_back(
                    ((bundle.rgb.tokens + bundle.hf.tokens + bundle.texture.tokens) / S(3)).eval());
        }
        std::vector<Mat<S>> conds;
        conds.reserve(static_cast<std::size_t>(batch));
        for (int b = 0; b < batch; ++b)
            conds.push_back(group_conds[static_cast<std::size_t>(group[static_cast<std::size_t>(b)])]);

        for (int b = 0; b < batch; ++b)
            xs.middleCols(b * hw, hw) = image_to_cols(x[static_cast<std::size_t>(b)]);
        Mat<S> eps_hat = model.forward(xs, std::vector<long>(static_cast<std::size_t>(batch), t),
                                       conds, batch, h, w);

        const double beta = schedule.betas[static_cast<std::size_t>(t)];
        const double alpha = schedule.alphas[static_cast<std::size_t>(t)];
        const double ab = schedule.alpha_bar(t);
        const S c_eps = static_cast<S>(beta / std::sqrt(1.0 - ab));
        const S c_mean = static_cast<S>(1.0 / std::sqrt(alpha));
        const S sigma = static_cast<S>(std::sqrt(beta));

        for (int b = 0; b < batch; ++b) {
            const auto& req = reqs[static_cast<std::size_t>(b)];
            Rng& rng = rngs[static_cast<std::size_t>(b)];
            Image<S>& xb = x[static_cast<std::size_t>(b)];
            Image<S> eh = cols_to_image(Mat<S>(eps_hat.middleCols(b * hw, hw)), h, w);
            for (int c = 0; c < ch; ++c)
                xb.planes[c] = c_mean * (xb.planes[c] - c_eps * eh.planes[c]);
            if (t > 0) {
                Image<S> z = noise_like<S>(h, w, ch, rng);
                for (int c = 0; c < ch; ++c) xb.planes[c] += sigma * z.planes[c];
                // Re-impose the noised background outside the mask.
                Image<S> zb = noise_like<S>(h, w, ch, rng);
                Image<S> bg_t = q_sample(req.background, t - 1, zb, schedule);
                for (int c = 0; c < ch; ++c)
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < w; ++xx)
                            if (!req.mask.data(y, xx)) xb.at(y, xx, c) = bg_t.at(y, xx, c);
            } else {
                xb.clamp01();
                for (int c = 0; c < ch; ++c)
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < w; ++xx)
                            if (!req.mask.data(y, xx)) xb.at(y, xx, c) = req.background.at(y, xx, c);
            }
        }
    }
    return x;
}

template <typename S>
Image<S> sample(const GenerationRequest<S>& req, const Denoiser<S>& model,
                const NoiseSchedule& schedule, const ModulationNet<S>& modulation,
                const EncoderWeights<S>& encoder, const SampleOptions& opts = {}) {
    return sample_batch(std::vector<GenerationRequest<S>>{req}, model, schedule, modulation,
                        encoder, opts)[0];
}

}  // namespace stitchdiff
