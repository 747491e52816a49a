#pragma once

#include <cmath>
#include <string>

#include "stitchdiff/image.hpp"
#include "stitchdiff/nn.hpp"
#include "stitchdiff/tensorfile.hpp"

namespace stitchdiff {

/// Ordered token embeddings, stored dim x count (one column per token).
template <typename S>
struct TokenSequence {
    Mat<S> tokens;

    int dim() const { return static_cast<int>(tokens.rows()); }
    int count() const { return static_cast<int>(tokens.cols()); }

    Vec<S> mean_pooled() const {
        require(count() > 0, Errc::input, "mean_pooled: empty token sequence");
        return tokens.rowwise().mean();
    }
};

struct EncoderConfig {
    int image_size = 32;
    int patch = 4;
    int dim = 64;
    int hidden = 128;

    int tokens_per_side() const { return image_size / patch; }
    int token_count() const { return tokens_per_side() * tokens_per_side(); }
    int patch_values() const { return patch * patch * 3; }

    void validate() const {
        require(image_size > 0 && patch > 0 && image_size % patch == 0, Errc::config,
                "encoder: image_size must be a positive multiple of patch");
        require(dim > 0 && dim % 2 == 0 && hidden > 0, Errc::config,
                "encoder: dim must be positive even, hidden positive");
    }
};

/// Frozen surrogate image encoder: bias-free linear patch embedding plus a
/// fixed sinusoidal positional table, finished by a tokenwise 2-layer MLP.
/// Weights are a pure function of (config, seed), so the encoder can be
/// reconstructed anywhere without shipping files, and the serialized form is
/// just a convenience for external tools.
template <typename S>
struct EncoderWeights {
    EncoderConfig cfg;
    std::uint64_t seed = 0;
    Mat<S> patch_proj;  // dim x patch_values, no bias: a zero image contributes nothing
    Mat<S> pos;         // dim x tokens
    Mat<S> head1_w;     // hidden x dim
    Vec<S> head1_b;
    Mat<S> head2_w;     // dim x hidden
    Vec<S> head2_b;

    static EncoderWeights make(const EncoderConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        EncoderWeights w;
        w.cfg = cfg;
        w.seed = seed;
        Rng rng(seed);
        Rng r_patch = rng.derive("patch_proj");
        Rng r_h1 = rng.derive("head1");
        Rng r_h2 = rng.derive("head2");

        auto fill = [](Mat<S>& m, int rows, int cols, Rng& r, double scale) {
            m.resize(rows, cols);
            for (int c = 0; c < cols; ++c)
                for (int rr = 0; rr < rows; ++rr) m(rr, c) = static_cast<S>(r.normal() * scale);
        };
        fill(w.patch_proj, cfg.dim, cfg.patch_values(), r_patch, 1.0 / std::sqrt(cfg.patch_values()));
        fill(w.head1_w, cfg.hidden, cfg.dim, r_h1, 1.0 / std::sqrt(cfg.dim));
        fill(w.head2_w, cfg.dim, cfg.hidden, r_h2, 1.0 / std::sqrt(cfg.hidden));
        w.head1_b = Vec<S>::Zero(cfg.hidden);
        w.head2_b = Vec<S>::Zero(cfg.dim);

        w.pos.resize(cfg.dim, cfg.token_count());
        for (int i = 0; i < cfg.token_count(); ++i) w.pos.col(i) = sincos_encode<S>(i, cfg.dim);
        return w;
    }

    void save(const std::string& path) const {
        std::vector<float> payload;
        append_matrix(payload, patch_proj);
        append_matrix(payload, pos);
        append_matrix(payload, head1_w);
        append_matrix(payload, Mat<S>(head1_b));
        append_matrix(payload, head2_w);
        append_matrix(payload, Mat<S>(head2_b));
        write_floats(path, payload);
    }

    void load(const std::string& path) {
        cfg.validate();
        std::vector<float> payload = read_floats(path);
        patch_proj.resize(cfg.dim, cfg.patch_values());
        pos.resize(cfg.dim, cfg.token_count());
        head1_w.resize(cfg.hidden, cfg.dim);
        head2_w.resize(cfg.dim, cfg.hidden);
        Mat<S> b1(cfg.hidden, 1), b2(cfg.dim, 1);
        long off = 0;
        auto take = [&](Mat<S>& m) {
            read_matrix(payload, off, m);
            off += m.size();
        };
        take(patch_proj);
        take(pos);
        take(head1_w);
        take(b1);
        take(head2_w);
        take(b2);
        require(off == static_cast<long>(payload.size()), Errc::io, "encoder file size mismatch: " + path);
        head1_b = b1.col(0);
        head2_b = b2.col(0);
    }
};

/// Deterministic token sequence for an image. Input of any size is bilinearly
/// resized to the encoder's fixed input; grayscale input is replicated to 3
/// channels first.
template <typename S>
TokenSequence<S> encode(const Image<S>& image, const EncoderWeights<S>& w) {
    const auto& cfg = w.cfg;
    Image<S> img = image;
    if (img.channels() == 1) img = replicate3<S>(img.planes[0]);
    require(img.channels() == 3, Errc::shape_mismatch, "encode: expected 1 or 3 channels");
    if (img.height() != cfg.image_size || img.width() != cfg.image_size)
        img = resize_bilinear(img, cfg.image_size, cfg.image_size);

    const int side = cfg.tokens_per_side();
    Mat<S> patches(cfg.patch_values(), cfg.token_count());
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            const int tok = py * side + px;
            int i = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < cfg.patch; ++y)
                    for (int x = 0; x < cfg.patch; ++x)
                        patches(i++, tok) = img.at(py * cfg.patch + y, px * cfg.patch + x, c);
        }
    }

    Mat<S> tok0 = w.patch_proj * patches + w.pos;
    Mat<S> h = ((w.head1_w * tok0).colwise() + w.head1_b).eval();
    h = silu(h);
    TokenSequence<S> out;
    out.tokens = ((w.head2_w * h).colwise() + w.head2_b).eval();
    return out;
}

/// Cosine similarity of mean-pooled tokens, in [-1,1].
template <typename S>
double similarity(const TokenSequence<S>& a, const TokenSequence<S>& b) {
    require(a.dim() == b.dim(), Errc::shape_mismatch, "similarity: token dims differ");
    const Vec<S> pa = a.mean_pooled();
    const Vec<S> pb = b.mean_pooled();
    const double na = pa.norm(), nb = pb.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double cosv = static_cast<double>(pa.dot(pb)) / (na * nb);
    return std::clamp(cosv, -1.0, 1.0);
}

}  // namespace stitchdiff
