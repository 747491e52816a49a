#pragma once

#include <array>
#include <string>

#include "stitchdiff/encoder.hpp"
#include "stitchdiff/nn.hpp"

namespace stitchdiff {

/// The three decoupled condition streams as token sequences. All streams
/// must share dim and count.
template <typename S>
struct FeatureBundle {
    TokenSequence<S> rgb;
    TokenSequence<S> hf;
    TokenSequence<S> texture;

    std::array<const TokenSequence<S>*, 3> streams() const { return {&rgb, &hf, &texture}; }

    void check(const char* where) const {
        require(rgb.dim() == hf.dim() && rgb.dim() == texture.dim() && rgb.count() == hf.count() &&
                    rgb.count() == texture.count(),
                Errc::shape_mismatch, where);
        require(rgb.count() > 0, Errc::input, where);
    }
};

template <typename S>
struct TimestepEmbedding {
    Vec<S> h;  // dim = time_dim (320 by default)
    long t = 0;
};

struct ModulationConfig {
    int time_dim = 320;
    int embed_hidden = 320;
    int ssvm_hidden = 256;
    int fwvm_hidden = 64;
    int favm_hidden = 128;
    double mod_alpha = 1.0;  // Eq. 5 alpha, fixed scalar hyperparameter
    double mod_beta = 1.0;   // Eq. 5 beta

    void validate() const {
        require(time_dim > 0 && time_dim % 2 == 0, Errc::config, "modulation: time_dim must be even");
        require(embed_hidden > 0 && ssvm_hidden > 0 && fwvm_hidden > 0 && favm_hidden > 0, Errc::config,
                "modulation: hidden widths must be positive");
    }
};

/// Timestep-conditioned feature modulation network: an embedding MLP over the
/// sinusoidal timestep code plus three heads
///   SSVM -> per-stream scale/shift vectors,
///   FWVM -> three fusion logits (softmax-normalized),
///   FAVM -> a final additive adjust vector.
///
/// Head output layers start at zero, and the scale is parameterized as
/// 1 + SSVM_s(h_t), so an untrained net is the identity: unit scale, zero
/// shift, uniform fusion weights, zero adjust.
template <typename S>
struct ModulationNet {
    ModulationConfig cfg;
    int cond_dim = 0;

    Mlp2<S> embed;  // time_dim -> embed_hidden -> time_dim
    Mlp2<S> ssvm;   // time_dim -> ssvm_hidden -> 6*cond_dim  [sR bR sH bH sT bT]
    Mlp2<S> fwvm;   // time_dim -> fwvm_hidden -> 3
    Mlp2<S> favm;   // time_dim -> favm_hidden -> cond_dim

    void init(const ModulationConfig& c, int cond_dim_, Rng& rng) {
        c.validate();
        require(cond_dim_ > 0, Errc::config, "modulation: cond_dim must be positive");
        cfg = c;
        cond_dim = cond_dim_;
        Rng r = rng.derive("modulation");
        embed.init("mod.embed", cfg.time_dim, cfg.embed_hidden, cfg.time_dim, r);
        ssvm.init_zero_output("mod.ssvm", cfg.time_dim, cfg.ssvm_hidden, 6 * cond_dim, r);
        fwvm.init_zero_output("mod.fwvm", cfg.time_dim, cfg.fwvm_hidden, 3, r);
        favm.init_zero_output("mod.favm", cfg.time_dim, cfg.favm_hidden, cond_dim, r);
    }

    ParamRefs<S> parameters() {
        ParamRefs<S> out;
        for (auto* list : {&embed, &ssvm, &fwvm, &favm})
            for (auto* p : list->parameters()) out.push_back(p);
        return out;
    }
};

template <typename S>
struct EmbedCache {
    typename Mlp2<S>::Cache mlp;
    bool valid = false;
};

/// Eq. 3: h_t = MLP(SinCos(t, time_dim)).
template <typename S>
TimestepEmbedding<S> embed_timestep(long t, const ModulationNet<S>& net, EmbedCache<S>* cache = nullptr) {
    require(t >= 0, Errc::range, "embed_timestep: t must be >= 0");
    Mat<S> code = sincos_encode<S>(t, net.cfg.time_dim);
    Mat<S> h = net.embed.forward(code, cache ? &cache->mlp : nullptr);
    if (cache) cache->valid = true;
    TimestepEmbedding<S> out;
    out.h = h.col(0);
    out.t = t;
    return out;
}

/// Backward companion of embed_timestep; accumulates embed-MLP gradients.
template <typename S>
void embed_timestep_backward(ModulationNet<S>& net, const EmbedCache<S>& cache, const Vec<S>& dh) {
    require(cache.valid, Errc::state, "embed_timestep_backward: missing forward cache");
    net.embed.backward(cache.mlp, Mat<S>(dh));
}

/// The resolved modulation parameters for one timestep: per-stream scale and
/// shift vectors, softmax fusion weights, and the final adjust vector.
template <typename S>
struct ModulationParams {
    std::array<Vec<S>, 3> scale;  // s_k, already including the +1 offset
    std::array<Vec<S>, 3> shift;  // b_k
    Vec<S> weights;               // 3 softmax fusion weights
    Vec<S> adjust;                // a_final
    double mod_alpha = 1.0;
    double mod_beta = 1.0;
};

/// Evaluates the three heads for one timestep embedding without touching any
/// feature stream.
template <typename S>
ModulationParams<S> modulation_params(const ModulationNet<S>& net, const TimestepEmbedding<S>& h_t,
                                      double mod_alpha, double mod_beta) {
    const int d = net.cond_dim;
    Mat<S> h(h_t.h);
    Mat<S> ssvm_out = net.ssvm.forward(h);
    Mat<S> logits = net.fwvm.forward(h);
    Mat<S> adjust = net.favm.forward(h);
    ModulationParams<S> p;
    for (int k = 0; k < 3; ++k) {
        p.scale[static_cast<std::size_t>(k)] = Vec<S>::Ones(d) + ssvm_out.col(0).segment(2 * k * d, d);
        p.shift[static_cast<std::size_t>(k)] = ssvm_out.col(0).segment((2 * k + 1) * d, d);
    }
    p.weights = softmax_cols(logits).col(0);
    p.adjust = adjust.col(0);
    p.mod_alpha = mod_alpha;
    p.mod_beta = mod_beta;
    return p;
}

template <typename S>
struct ModulationCache {
    typename Mlp2<S>::Cache ssvm, fwvm, favm;
    Mat<S> streams[3];      // the raw inputs F_k
    Mat<S> modulated[3];    // F_k^mod
    Vec<S> scale[3];        // s_k (after the +1 offset)
    Vec<S> weights;         // softmax fusion weights, 3
    bool valid = false;
};

template <typename S>
struct ModulationGrads {
    Mat<S> d_streams[3];  // gradients w.r.t. F_RGB, F_HF, F_texture
    Vec<S> d_h;           // gradient w.r.t. h_t (chain into embed_timestep_backward)
};

/// Eqs. 4-8: per-stream scale/shift, softmax-weighted fusion, additive
/// adjust. Scale/shift are per-channel vectors broadcast across tokens.
template <typename S>
TokenSequence<S> modulate(const FeatureBundle<S>& bundle, const TimestepEmbedding<S>& h_t,
                          const ModulationNet<S>& net, double mod_alpha, double mod_beta,
                          ModulationCache<S>* cache = nullptr) {
    bundle.check("modulate: streams must share dim and count");
    require(bundle.rgb.dim() == net.cond_dim, Errc::shape_mismatch,
            "modulate: stream dim does not match net cond_dim");
    const int d = net.cond_dim;

    Mat<S> h(h_t.h);
    Mat<S> ssvm_out = net.ssvm.forward(h, cache ? &cache->ssvm : nullptr);   // 6d x 1
    Mat<S> logits = net.fwvm.forward(h, cache ? &cache->fwvm : nullptr);     // 3 x 1
    Mat<S> adjust = net.favm.forward(h, cache ? &cache->favm : nullptr);     // d x 1

    Vec<S> weights = softmax_cols(logits).col(0);

    const auto streams = bundle.streams();
    Mat<S> fused = Mat<S>::Zero(d, bundle.rgb.count());
    for (int k = 0; k < 3; ++k) {
        Vec<S> s = Vec<S>::Ones(d) + ssvm_out.col(0).segment(2 * k * d, d);
        Vec<S> b = ssvm_out.col(0).segment((2 * k + 1) * d, d);
        Mat<S> mod = (streams[static_cast<std::size_t>(k)]->tokens.array().colwise() *
                      (static_cast<S>(mod_alpha) * s).array())
                         .matrix();
        mod.colwise() += static_cast<S>(mod_beta) * b;
        fused.noalias() += weights(k) * mod;
        if (cache) {
            cache->streams[k] = streams[static_cast<std::size_t>(k)]->tokens;
            cache->modulated[k] = std::move(mod);
            cache->scale[k] = std::move(s);
        }
    }
    fused.colwise() += adjust.col(0);
    if (cache) {
        cache->weights = weights;
        cache->valid = true;
    }
    TokenSequence<S> out;
    out.tokens = std::move(fused);
    return out;
}

/// Exact gradients for every modulation parameter and for the input streams.
/// Requires the cache from the matching forward call.
template <typename S>
ModulationGrads<S> modulate_backward(ModulationNet<S>& net, const ModulationCache<S>& cache,
                                     double mod_alpha, double mod_beta, const Mat<S>& d_out) {
    require(cache.valid, Errc::state, "modulate_backward: missing forward cache");
    const int d = net.cond_dim;
    require(d_out.rows() == d, Errc::shape_mismatch, "modulate_backward: bad upstream gradient shape");

    ModulationGrads<S> grads;

    // Eq. 8: F_out = F_fused + a  (a broadcast over tokens)
    Mat<S> d_adjust = d_out.rowwise().sum();
    Vec<S> d_h = net.favm.backward(cache.favm, d_adjust).col(0);

    // Eqs. 6-7: F_fused = sum_k w_k F_k^mod
    Vec<S> d_weights(3);
    Mat<S> d_ssvm_out = Mat<S>::Zero(6 * d, 1);
    for (int k = 0; k < 3; ++k) {
        d_weights(k) = (cache.modulated[k].array() * d_out.array()).sum();
        Mat<S> d_mod = cache.weights(k) * d_out;
        // Eq. 5: F_k^mod = F_k .* (alpha s_k) + beta b_k
        d_ssvm_out.col(0).segment(2 * k * d, d) =
            static_cast<S>(mod_alpha) * (d_mod.array() * cache.streams[k].array()).rowwise().sum();
        d_ssvm_out.col(0).segment((2 * k + 1) * d, d) = static_cast<S>(mod_beta) * d_mod.rowwise().sum();
        grads.d_streams[k] =
            (d_mod.array().colwise() * (static_cast<S>(mod_alpha) * cache.scale[k]).array()).matrix();
    }

    Mat<S> w(cache.weights);
    Mat<S> d_logits = softmax_cols_backward(w, Mat<S>(d_weights));
    d_h += net.fwvm.backward(cache.fwvm, d_logits).col(0);
    d_h += net.ssvm.backward(cache.ssvm, d_ssvm_out).col(0);

    grads.d_h = std::move(d_h);
    return grads;
}

}  // namespace stitchdiff
