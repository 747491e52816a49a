#pragma once

#include <vector>

#include "stitchdiff/encoder.hpp"
#include "stitchdiff/image.hpp"
#include "stitchdiff/nn.hpp"

namespace stitchdiff {

// Feature maps flow through the network as (channels x batch*H*W) matrices;
// these helpers convert to and from the Image type at the boundaries.

template <typename S>
Mat<S> image_to_cols(const Image<S>& img) {
    Mat<S> out(img.channels(), static_cast<long>(img.height()) * img.width());
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                out(c, static_cast<long>(y) * img.width() + x) = img.at(y, x, c);
    return out;
}

template <typename S>
Image<S> cols_to_image(const Mat<S>& cols, int h, int w) {
    Image<S> out(h, w, static_cast<int>(cols.rows()));
    for (int c = 0; c < out.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(y, x, c) = cols(c, static_cast<long>(y) * w + x);
    return out;
}

/// Pre-activation conv block with timestep FiLM:
///   y = film(conv(silu(x)), temb) + skip(x)
/// where film scales and shifts per channel with (1+gamma_t, beta_t) and the
/// skip is a 1x1 projection when the channel count changes.
template <typename S>
struct FilmBlock {
    Conv2d<S> conv;
    Conv2d<S> proj;
    Linear<S> film;
    bool has_proj = false;
    int cout = 0;

    struct Cache {
        Mat<S> x;
        typename Conv2d<S>::Cache conv, proj;
        Mat<S> h_conv;   // conv output before film
        Mat<S> film_out; // (2*cout x batch)
        Mat<S> temb;
        int batch = 0, h = 0, w = 0;
        bool valid = false;
    };

    void init(const std::string& name, int cin, int cout_, int temb_dim, Rng& rng) {
        cout = cout_;
        has_proj = cin != cout_;
        conv.init(name + ".conv", cin, cout_, 3, 1, rng);
        if (has_proj) proj.init(name + ".proj", cin, cout_, 1, 1, rng);
        film.init(name + ".film", temb_dim, 2 * cout_, rng);
        film.W.w.setZero();  // start as identity modulation
    }

    ParamRefs<S> parameters() {
        ParamRefs<S> out = {&conv.W, &conv.b, &film.W, &film.b};
        if (has_proj) {
            out.push_back(&proj.W);
            out.push_back(&proj.b);
        }
        return out;
    }

    Mat<S> forward(const Mat<S>& x, const Mat<S>& temb, int batch, int h, int w,
                   Cache* cache = nullptr) const {
        Mat<S> a = silu(x);
        Mat<S> hc = conv.forward(a, batch, h, w, cache ? &cache->conv : nullptr);
        Mat<S> fb = film.forward(temb);
        const long hw = static_cast<long>(h) * w;
        Mat<S> y = hc;
        for (int b = 0; b < batch; ++b) {
            auto block = y.middleCols(b * hw, hw);
            block.array().colwise() *= (Vec<S>::Ones(cout) + fb.col(b).head(cout)).array();
            block.colwise() += fb.col(b).tail(cout);
        }
        if (has_proj) {
            y += proj.forward(x, batch, h, w, cache ? &cache->proj : nullptr);
        } else {
            y += x;
        }
        if (cache) {
            cache->x = x;
            cache->h_conv = std::move(hc);
            cache->film_out = std::move(fb);
            cache->temb = temb;
            cache->batch = batch;
            cache->h = h;
            cache->w = w;
            cache->valid = true;
        }
        return y;
    }

    /// Returns dx; accumulates parameter grads and adds the timestep-path
    /// gradient into dtemb.
    Mat<S> backward(const Cache& cache, const Mat<S>& dy, Mat<S>& dtemb) {
        require(cache.valid, Errc::state, "film block backward without forward cache");
        const long hw = static_cast<long>(cache.h) * cache.w;
        Mat<S> dfb = Mat<S>::Zero(2 * cout, cache.batch);
        Mat<S> dhc(dy.rows(), dy.cols());
        for (int b = 0; b < cache.batch; ++b) {
            auto dyb = dy.middleCols(b * hw, hw);
            auto hcb = cache.h_conv.middleCols(b * hw, hw);
            dfb.col(b).head(cout) = (dyb.array() * hcb.array()).rowwise().sum();
            dfb.col(b).tail(cout) = dyb.rowwise().sum();
            dhc.middleCols(b * hw, hw) =
                (dyb.array().colwise() *
                 (Vec<S>::Ones(cout) + cache.film_out.col(b).head(cout)).array())
                    .matrix();
        }
        dtemb += film.backward(cache.temb, dfb);
        Mat<S> da = conv.backward(cache.conv, dhc);
        Mat<S> dx = (da.array() * silu_grad(cache.x).array()).matrix();
        if (has_proj) {
            dx += proj.backward(cache.proj, dy);
        } else {
            dx += dy;
        }
        return dx;
    }
};

/// Single-head cross-attention from pixels (queries) to condition tokens
/// (keys/values), with a residual connection.
template <typename S>
struct CrossAttention {
    Linear<S> wq, wk, wv, wo;
    int ch = 0;

    struct Cache {
        Mat<S> x;
        std::vector<Mat<S>> cond, q, k, v, a, o;
        int batch = 0;
        long n = 0;
        bool valid = false;
    };

    void init(const std::string& name, int ch_, int cond_dim, Rng& rng) {
        ch = ch_;
        wq.init(name + ".wq", ch_, ch_, rng);
        wk.init(name + ".wk", cond_dim, ch_, rng);
        wv.init(name + ".wv", cond_dim, ch_, rng);
        wo.init(name + ".wo", ch_, ch_, rng, 0.1);  // small output gain keeps the residual dominant at init
    }

    ParamRefs<S> parameters() { return {&wq.W, &wq.b, &wk.W, &wk.b, &wv.W, &wv.b, &wo.W, &wo.b}; }

    Mat<S> forward(const Mat<S>& x, const std::vector<Mat<S>>& cond, int batch, long n,
                   Cache* cache = nullptr) const {
        require(static_cast<int>(cond.size()) == batch, Errc::shape_mismatch,
                "cross-attention: one condition per batch item required");
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(ch)));
        Mat<S> out(x.rows(), x.cols());
        if (cache) {
            cache->cond.assign(cond.begin(), cond.end());
            cache->q.resize(static_cast<std::size_t>(batch));
            cache->k.resize(static_cast<std::size_t>(batch));
            cache->v.resize(static_cast<std::size_t>(batch));
            cache->a.resize(static_cast<std::size_t>(batch));
            cache->o.resize(static_cast<std::size_t>(batch));
        }
        for (int b = 0; b < batch; ++b) {
            Mat<S> xb = x.middleCols(b * n, n);
            Mat<S> q = wq.forward(xb);
            Mat<S> k = wk.forward(cond[static_cast<std::size_t>(b)]);
            Mat<S> v = wv.forward(cond[static_cast<std::size_t>(b)]);
            Mat<S> att = softmax_cols(Mat<S>(k.transpose() * q * scale));
            Mat<S> o = v * att;
            out.middleCols(b * n, n) = xb + wo.forward(o);
            if (cache) {
                cache->q[static_cast<std::size_t>(b)] = std::move(q);
                cache->k[static_cast<std::size_t>(b)] = std::move(k);
                cache->v[static_cast<std::size_t>(b)] = std::move(v);
                cache->a[static_cast<std::size_t>(b)] = std::move(att);
                cache->o[static_cast<std::size_t>(b)] = std::move(o);
            }
        }
        if (cache) {
            cache->x = x;
            cache->batch = batch;
            cache->n = n;
            cache->valid = true;
        }
        return out;
    }

    /// Returns dx; when dcond is non-null it receives per-item condition
    /// gradients (the path back into the modulation network).
    Mat<S> backward(const Cache& cache, const Mat<S>& dy, std::vector<Mat<S>>* dcond) {
        require(cache.valid, Errc::state, "cross-attention backward without forward cache");
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(ch)));
        const long n = cache.n;
        Mat<S> dx = dy;  // residual path
        if (dcond) dcond->assign(static_cast<std::size_t>(cache.batch), Mat<S>());
        for (int b = 0; b < cache.batch; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            Mat<S> dyb = dy.middleCols(b * n, n);
            Mat<S> xb = cache.x.middleCols(b * n, n);
            Mat<S> d_o = wo.backward(cache.o[bi], dyb);
            Mat<S> d_a = cache.v[bi].transpose() * d_o;
            Mat<S> d_v = d_o * cache.a[bi].transpose();
            Mat<S> d_scores = softmax_cols_backward(cache.a[bi], d_a) * scale;
            Mat<S> d_q = cache.k[bi] * d_scores;
            Mat<S> d_k = cache.q[bi] * d_scores.transpose();
            dx.middleCols(b * n, n) += wq.backward(xb, d_q);
            Mat<S> dc = wk.backward(cache.cond[bi], d_k) + wv.backward(cache.cond[bi], d_v);
            if (dcond) (*dcond)[bi] = std::move(dc);
        }
        return dx;
    }
};

struct DenoiserConfig {
    int in_channels = 3;
    int base_width = 32;
    int temb_dim = 128;
    int cond_dim = 64;

    void validate() const {
        require(in_channels > 0 && base_width > 0 && cond_dim > 0, Errc::config,
                "denoiser: channel counts must be positive");
        require(temb_dim > 0 && temb_dim % 2 == 0, Errc::config, "denoiser: temb_dim must be even");
    }
};

/// Small U-shaped denoiser: two resolutions, FiLM timestep injection per
/// block, one cross-attention block at the bottleneck, zero-initialized
/// output conv (an untrained model predicts zero noise). Output shape equals
/// input shape.
template <typename S>
struct Denoiser {
    DenoiserConfig cfg;
    bool trained = false;

    Mlp2<S> temb_mlp;
    Conv2d<S> conv_in;
    FilmBlock<S> block_a;
    Conv2d<S> down;
    FilmBlock<S> block_b;
    CrossAttention<S> attn;
    FilmBlock<S> block_c;
    Conv2d<S> up_proj;
    FilmBlock<S> block_d;
    Conv2d<S> conv_out;

    void init(const DenoiserConfig& c, Rng& rng) {
        c.validate();
        cfg = c;
        const int w = cfg.base_width;
        Rng r = rng.derive("denoiser");
        temb_mlp.init("den.temb", cfg.temb_dim, cfg.temb_dim, cfg.temb_dim, r);
        conv_in.init("den.conv_in", cfg.in_channels, w, 3, 1, r);
        block_a.init("den.block_a", w, w, cfg.temb_dim, r);
        down.init("den.down", w, 2 * w, 3, 2, r);
        block_b.init("den.block_b", 2 * w, 2 * w, cfg.temb_dim, r);
        attn.init("den.attn", 2 * w, cfg.cond_dim, r);
        block_c.init("den.block_c", 2 * w, 2 * w, cfg.temb_dim, r);
        up_proj.init("den.up_proj", 2 * w, w, 1, 1, r);
        block_d.init("den.block_d", 2 * w, w, cfg.temb_dim, r);
        conv_out.init("den.conv_out", w, cfg.in_channels, 3, 1, r);
        conv_out.W.w.setZero();
        conv_out.b.w.setZero();
    }

    ParamRefs<S> parameters() {
        ParamRefs<S> out;
        auto add = [&out](ParamRefs<S> list) { out.insert(out.end(), list.begin(), list.end()); };
        add(temb_mlp.parameters());
        add(conv_in.parameters());
        add(block_a.parameters());
        add(down.parameters());
        add(block_b.parameters());
        add(attn.parameters());
        add(block_c.parameters());
        add(up_proj.parameters());
        add(block_d.parameters());
        add(conv_out.parameters());
        return out;
    }

    struct Cache {
        typename Mlp2<S>::Cache temb;
        typename Conv2d<S>::Cache conv_in, down, up_proj, conv_out;
        typename FilmBlock<S>::Cache block_a, block_b, block_c, block_d;
        typename CrossAttention<S>::Cache attn;
        Mat<S> x, h0, a1, u0;
        int batch = 0, h = 0, w = 0;
        bool valid = false;
    };

    /// x: (in_channels x batch*H*W); ts: one timestep per item; cond: one
    /// (cond_dim x tokens) matrix per item.
    Mat<S> forward(const Mat<S>& x, const std::vector<long>& ts, const std::vector<Mat<S>>& cond,
                   int batch, int h, int w, Cache* cache = nullptr) const {
        require(h % 2 == 0 && w % 2 == 0, Errc::shape_mismatch, "denoiser: H and W must be even");
        require(static_cast<int>(ts.size()) == batch, Errc::shape_mismatch,
                "denoiser: one timestep per item required");

        Mat<S> code(cfg.temb_dim, batch);
        for (int b = 0; b < batch; ++b) code.col(b) = sincos_encode<S>(ts[static_cast<std::size_t>(b)], cfg.temb_dim);
        Mat<S> temb = temb_mlp.forward(code, cache ? &cache->temb : nullptr);

        const int h2 = h / 2, w2 = w / 2;
        Mat<S> h0 = conv_in.forward(x, batch, h, w, cache ? &cache->conv_in : nullptr);
        Mat<S> a1 = block_a.forward(h0, temb, batch, h, w, cache ? &cache->block_a : nullptr);
        Mat<S> h2m = down.forward(a1, batch, h, w, cache ? &cache->down : nullptr);
        Mat<S> b1 = block_b.forward(h2m, temb, batch, h2, w2, cache ? &cache->block_b : nullptr);
        Mat<S> at = attn.forward(b1, cond, batch, static_cast<long>(h2) * w2,
                                 cache ? &cache->attn : nullptr);
        Mat<S> c1 = block_c.forward(at, temb, batch, h2, w2, cache ? &cache->block_c : nullptr);
        Mat<S> u0 = upsample_nearest2(c1, batch, h2, w2);
        Mat<S> u1 = up_proj.forward(u0, batch, h, w, cache ? &cache->up_proj : nullptr);
        Mat<S> cat(a1.rows() + u1.rows(), a1.cols());
        cat << a1, u1;
        Mat<S> d1 = block_d.forward(cat, temb, batch, h, w, cache ? &cache->block_d : nullptr);
        Mat<S> out = conv_out.forward(d1, batch, h, w, cache ? &cache->conv_out : nullptr);

        if (cache) {
            cache->x = x;
            cache->h0 = std::move(h0);
            cache->a1 = std::move(a1);
            cache->u0 = std::move(u0);
            cache->batch = batch;
            cache->h = h;
            cache->w = w;
            cache->valid = true;
        }
        return out;
    }

    /// Accumulates parameter grads; returns dL/dx and, via dcond, per-item
    /// gradients for the condition tokens.
    Mat<S> backward(Cache& cache, const Mat<S>& dy, std::vector<Mat<S>>* dcond = nullptr) {
        require(cache.valid, Errc::state, "denoiser backward without forward cache");
        const int batch = cache.batch, h = cache.h, w = cache.w;
        const int h2 = h / 2, w2 = w / 2;
        const int bw = cfg.base_width;

        Mat<S> dtemb = Mat<S>::Zero(cfg.temb_dim, batch);
        Mat<S> dd1 = conv_out.backward(cache.conv_out, dy);
        Mat<S> dcat = block_d.backward(cache.block_d, dd1, dtemb);
        Mat<S> da1 = dcat.topRows(bw);
        Mat<S> du1 = dcat.bottomRows(bw);
        Mat<S> du0 = up_proj.backward(cache.up_proj, du1);
        Mat<S> dc1 = upsample_nearest2_backward(du0, batch, h2, w2);
        Mat<S> dat = block_c.backward(cache.block_c, dc1, dtemb);
        Mat<S> db1 = attn.backward(cache.attn, dat, dcond);
        Mat<S> dh2 = block_b.backward(cache.block_b, db1, dtemb);
        da1 += down.backward(cache.down, dh2);
        Mat<S> dh0 = block_a.backward(cache.block_a, da1, dtemb);
        Mat<S> dx = conv_in.backward(cache.conv_in, dh0);
        temb_mlp.backward(cache.temb, dtemb);
        return dx;
    }
};

/// One conditioned forward pass for a single image.
template <typename S>
Image<S> predict_eps(const Image<S>& x_t, int t, const TokenSequence<S>& cond,
                     const Denoiser<S>& model) {
    Mat<S> x = image_to_cols(x_t);
    std::vector<Mat<S>> conds = {cond.tokens};
    Mat<S> out = model.forward(x, {t}, conds, 1, x_t.height(), x_t.width());
    return cols_to_image(out, x_t.height(), x_t.width());
}

}  // namespace stitchdiff
