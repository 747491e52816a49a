#pragma once

#include <vector>

#include "stitchdiff/conditioning.hpp"
#include "stitchdiff/denoiser.hpp"
#include "stitchdiff/losses.hpp"
#include "stitchdiff/prior.hpp"
#include "stitchdiff/sampler.hpp"

namespace stitchdiff {

/// One training example: a ground-truth composite scene, its foreground
/// mask, the index of the reference set to condition on, and the
/// text-presence flag for the OCR gate.
template <typename S>
struct TrainItem {
    Image<S> scene;
    Mask mask;
    int ref_index = 0;
    bool has_text = false;
};

/// Mutable training state. Condition bundles are precomputed per reference
/// set (they are frozen-encoder outputs and never change during training).
template <typename S>
struct Trainer {
    Denoiser<S>* model = nullptr;
    ModulationNet<S>* modulation = nullptr;
    const EncoderWeights<S>* encoder = nullptr;
    NoiseSchedule schedule;
    LossConfig loss_cfg;
    PriorConfig prior_cfg;
    HfConfig hf_cfg;
    FrozenConvNet<S> ocr;
    std::vector<FeatureBundle<S>> bundles;
    Adam<S> opt;
    ParamRefs<S> params;
    Rng rng{0};
    long step = 0;
    bool use_tfd = true;  // condition decoupling toggle
    bool use_tm = true;   // timestep modulation toggle

    void init(Denoiser<S>& m, ModulationNet<S>& mod, const EncoderWeights<S>& enc,
              const NoiseSchedule& sched, const LossConfig& lc, const PriorConfig& pc,
              const HfConfig& hc, std::uint64_t ocr_seed, double lr, Rng train_rng) {
        model = &m;
        modulation = &mod;
        encoder = &enc;
        schedule = sched;
        loss_cfg = lc;
        prior_cfg = pc;
        hf_cfg = hc;
        lc.validate(sched.T);
        pc.validate(sched.T);
        ocr = FrozenConvNet<S>::make(ocr_seed);
        params = m.parameters();
        for (auto* p : mod.parameters()) params.push_back(p);
        opt.lr = lr;
        opt.reset(params);
        rng = train_rng;
        step = 0;
    }

    void cache_bundle(const ReferenceSet<S>& refs) {
        bundles.push_back(build_bundle(refs, *encoder, hf_cfg, use_tfd));
    }
};

/// One optimizer step over a batch: sample t per item, apply the training
/// pose prior at high-noise steps, run the conditioned denoiser, combine the
/// conditional loss, backpropagate, and update. Returns the batch-aggregated
/// report (component means; ocr fields reflect the gated contributions).
template <typename S>
LossReport train_step(Trainer<S>& tr, const std::vector<const TrainItem<S>*>& batch) {
    require(!batch.empty(), Errc::input, "train_step: empty batch");
    const int bsz = static_cast<int>(batch.size());
    const int h = batch[0]->scene.height(), w = batch[0]->scene.width();
    const int ch = batch[0]->scene.channels();
    const long hw = static_cast<long>(h) * w;

    std::vector<long> ts(static_cast<std::size_t>(bsz));
    std::vector<Image<S>> eps_target, x_t;
    std::vector<Mat<S>> conds;
    std::vector<EmbedCache<S>> ecs(static_cast<std::size_t>(bsz));
    std::vector<ModulationCache<S>> mcs(static_cast<std::size_t>(bsz));
    Mat<S> xs(ch, static_cast<long>(bsz) * hw);

    for (int b = 0; b < bsz; ++b) {
        const TrainItem<S>& item = *batch[static_cast<std::size_t>(b)];
        require(item.scene.height() == h && item.scene.width() == w, Errc::shape_mismatch,
                "train_step: batch images must share shape");
        require(item.ref_index >= 0 && item.ref_index < static_cast<int>(tr.bundles.size()),
                Errc::input, "train_step: reference index out of range");
        const int t = static_cast<int>(tr.rng.below(static_cast<std::uint64_t>(tr.schedule.T)));
        ts[static_cast<std::size_t>(b)] = t;
        Image<S> eps = noise_like<S>(h, w, ch, tr.rng);
        eps = fuse_training(eps, item.scene, item.mask, tr.prior_cfg, tr.hf_cfg, t);
        x_t.push_back(q_sample(item.scene, t, eps, tr.schedule));
        eps_target.push_back(std::move(eps));
        xs.middleCols(static_cast<long>(b) * hw, hw) = image_to_cols(x_t.back());

        const FeatureBundle<S>& bundle = tr.bundles[static_cast<std::size_t>(item.ref_index)];
        if (tr.use_tm) {
            TimestepEmbedding<S> h_t =
                embed_timestep(t, *tr.modulation, &ecs[static_cast<std::size_t>(b)]);
            conds.push_back(modulate(bundle, h_t, *tr.modulation, tr.modulation->cfg.mod_alpha,
                                     tr.modulation->cfg.mod_beta, &mcs[static_cast<std::size_t>(b)])
                                .tokens);
        } else {
            conds.push_back(
                ((bundle.rgb.tokens + bundle.hf.tokens + bundle.texture.tokens) / S(3)).eval());
        }
    }

    typename Denoiser<S>::Cache cache;
    Mat<S> eps_hat = tr.model->forward(xs, ts, conds, bsz, h, w, &cache);

    zero_grads(tr.params);
    Mat<S> d_eps = Mat<S>::Zero(ch, static_cast<long>(bsz) * hw);
    double vlb = 0.0, mse = 0.0, ocr = 0.0;
    bool any_active = false, any_text = false;
    const double inv_b = 1.0 / static_cast<double>(bsz);
    for (int b = 0; b < bsz; ++b) {
        const TrainItem<S>& item = *batch[static_cast<std::size_t>(b)];
        Image<S> eh = cols_to_image(Mat<S>(eps_hat.middleCols(static_cast<long>(b) * hw, hw)), h, w);
        auto res = conditional_loss_with_grad(
            eps_target[static_cast<std::size_t>(b)], eh, x_t[static_cast<std::size_t>(b)],
            static_cast<int>(ts[static_cast<std::size_t>(b)]), item.scene, item.has_text,
            tr.loss_cfg, tr.schedule, tr.ocr, item.mask.empty() ? nullptr : &item.mask);
        vlb += res.report.l_vlb * inv_b;
        mse += res.report.l_mse * inv_b;
        ocr += res.report.l_ocr * inv_b;
        any_active = any_active || res.report.ocr_active;
        any_text = any_text || res.report.has_text;
        d_eps.middleCols(static_cast<long>(b) * hw, hw) =
            static_cast<S>(inv_b) * image_to_cols(res.d_eps_hat);
    }

    std::vector<Mat<S>> dconds;
    tr.model->backward(cache, d_eps, &dconds);
    if (tr.use_tm) {
        for (int b = 0; b < bsz; ++b) {
            auto grads = modulate_backward(*tr.modulation, mcs[static_cast<std::size_t>(b)],
                                           tr.modulation->cfg.mod_alpha, tr.modulation->cfg.mod_beta,
                                           dconds[static_cast<std::size_t>(b)]);
            embed_timestep_backward(*tr.modulation, ecs[static_cast<std::size_t>(b)], grads.d_h);
        }
    }

    tr.opt.step(tr.params);
    tr.model->trained = true;
    ++tr.step;
    return LossReport::make(vlb, mse, ocr, any_active, any_text, ts[0], tr.loss_cfg);
}

}  // namespace stitchdiff
