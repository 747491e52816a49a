#pragma once

// Small seeded model/modulation/bundle fixtures shared by the diffusion,
// loss, and acceptance suites.

#include "stitchdiff/denoiser.hpp"
#include "stitchdiff/modulation.hpp"

namespace tinymodel {

using namespace stitchdiff;

template <typename S>
struct Fixture {
    Denoiser<S> model;
    ModulationNet<S> modulation;
    FeatureBundle<S> bundle;
    DenoiserConfig den_cfg;
    ModulationConfig mod_cfg;
};

/// Perturbs every parameter with seeded Gaussian noise (moves heads off
/// their zero initialization so gradients flow everywhere).
template <typename S>
void jitter(ParamRefs<S> params, Rng& rng, double scale) {
    for (auto* p : params)
        for (long c = 0; c < p->w.cols(); ++c)
            for (long r = 0; r < p->w.rows(); ++r) p->w(r, c) += static_cast<S>(rng.normal() * scale);
}

template <typename S>
FeatureBundle<S> random_bundle(Rng& rng, int dim, int count) {
    FeatureBundle<S> b;
    for (TokenSequence<S>* s : {&b.rgb, &b.hf, &b.texture}) {
        s->tokens.resize(dim, count);
        for (int c = 0; c < count; ++c)
            for (int r = 0; r < dim; ++r) s->tokens(r, c) = static_cast<S>(rng.normal() * 0.5);
    }
    return b;
}

/// Tiny configuration: width 8 at 8x8 input, 16-dim condition tokens.
template <typename S>
Fixture<S> make(std::uint64_t seed, bool jitter_params = true) {
    Fixture<S> f;
    f.den_cfg.base_width = 8;
    f.den_cfg.temb_dim = 32;
    f.den_cfg.cond_dim = 16;
    f.mod_cfg.time_dim = 64;
    f.mod_cfg.embed_hidden = 32;
    f.mod_cfg.ssvm_hidden = 32;
    f.mod_cfg.fwvm_hidden = 16;
    f.mod_cfg.favm_hidden = 16;
    Rng rng(seed);
    f.model.init(f.den_cfg, rng);
    f.modulation.init(f.mod_cfg, f.den_cfg.cond_dim, rng);
    if (jitter_params) {
        Rng jr = rng.derive("jitter");
        jitter<S>(f.model.parameters(), jr, 0.02);
        jitter<S>(f.modulation.parameters(), jr, 0.02);
    }
    Rng br = rng.derive("bundle");
    f.bundle = random_bundle<S>(br, f.den_cfg.cond_dim, 9);
    return f;
}

template <typename S>
Image<S> random_x0(Rng& rng, int h = 8, int w = 8, double lo = 0.15, double hi = 0.85) {
    Image<S> img(h, w, 3);
    for (auto& p : img.planes)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) p(y, x) = static_cast<S>(rng.uniform(lo, hi));
    return img;
}

}  // namespace tinymodel
