#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "stitchdiff/error.hpp"
#include "stitchdiff/rng.hpp"

namespace stitchdiff {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Trainable tensor with a paired gradient buffer of the same shape.
template <typename S>
struct Param {
    std::string name;
    Mat<S> w;
    Mat<S> g;

    void init(const std::string& n, int rows, int cols) {
        name = n;
        w.setZero(rows, cols);
        g.setZero(rows, cols);
    }

    void init_gaussian(const std::string& n, int rows, int cols, Rng& rng, double scale) {
        init(n, rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) w(r, c) = static_cast<S>(rng.normal() * scale);
    }

    void zero_grad() { g.setZero(); }
};

template <typename S>
using ParamRefs = std::vector<Param<S>*>;

template <typename S>
void zero_grads(const ParamRefs<S>& params) {
    for (auto* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename S>
S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
Mat<S> silu(const Mat<S>& x) {
    return x.unaryExpr([](S v) { return v * sigmoid(v); });
}

/// d silu / dx evaluated from the pre-activation input.
template <typename S>
Mat<S> silu_grad(const Mat<S>& x) {
    return x.unaryExpr([](S v) {
        const S s = sigmoid(v);
        return s * (S(1) + v * (S(1) - s));
    });
}

/// Column-wise softmax.
template <typename S>
Mat<S> softmax_cols(const Mat<S>& x) {
    Mat<S> out(x.rows(), x.cols());
    for (int c = 0; c < x.cols(); ++c) {
        Vec<S> col = x.col(c);
        const S m = col.maxCoeff();
        Vec<S> e = (col.array() - m).exp();
        out.col(c) = e / e.sum();
    }
    return out;
}

/// Backward through column-wise softmax: dx = a .* (dy - sum(a .* dy)).
template <typename S>
Mat<S> softmax_cols_backward(const Mat<S>& a, const Mat<S>& dy) {
    Mat<S> dx(a.rows(), a.cols());
    for (int c = 0; c < a.cols(); ++c) {
        const S dot = a.col(c).dot(dy.col(c));
        dx.col(c) = a.col(c).array() * (dy.col(c).array() - dot);
    }
    return dx;
}

/// Sinusoidal position/timestep encoding (transformer convention): the first
/// dim/2 entries are sin(t*w_i), the last dim/2 are cos(t*w_i), with
/// w_i = 10000^(-2i/dim).
template <typename S>
Vec<S> sincos_encode(long t, int dim) {
    require(dim > 0 && dim % 2 == 0, Errc::config, "sincos_encode: dim must be positive and even");
    Vec<S> out(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double w = std::pow(10000.0, -2.0 * i / dim);
        out(i) = static_cast<S>(std::sin(t * w));
        out(half + i) = static_cast<S>(std::cos(t * w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear / MLP
// ---------------------------------------------------------------------------

/// y = W x + b applied column-wise (columns are tokens or batch items).
template <typename S>
struct Linear {
    Param<S> W;
    Param<S> b;

    void init(const std::string& name, int in, int out, Rng& rng, double gain = 1.0) {
        W.init_gaussian(name + ".W", out, in, rng, gain / std::sqrt(static_cast<double>(in)));
        b.init(name + ".b", out, 1);
    }

    ParamRefs<S> parameters() { return {&W, &b}; }

    Mat<S> forward(const Mat<S>& x) const { return (W.w * x).colwise() + b.w.col(0); }

    /// Accumulates parameter gradients and returns dL/dx.
    Mat<S> backward(const Mat<S>& x, const Mat<S>& dy) {
        W.g.noalias() += dy * x.transpose();
        b.g.col(0) += dy.rowwise().sum();
        return W.w.transpose() * dy;
    }
};

/// Two-layer perceptron with one SiLU nonlinearity, the building block used
/// for every trainable head in the model.
template <typename S>
struct Mlp2 {
    Linear<S> l1, l2;

    struct Cache {
        Mat<S> x;
        Mat<S> pre;  // l1 output before activation
        bool valid = false;
    };

    void init(const std::string& name, int in, int hidden, int out, Rng& rng, double out_gain = 1.0) {
        l1.init(name + ".l1", in, hidden, rng);
        l2.init(name + ".l2", hidden, out, rng, out_gain);
    }

    void init_zero_output(const std::string& name, int in, int hidden, int out, Rng& rng) {
        l1.init(name + ".l1", in, hidden, rng);
        l2.W.init(name + ".l2.W", out, hidden);
        l2.b.init(name + ".l2.b", out, 1);
    }

    ParamRefs<S> parameters() {
        return {&l1.W, &l1.b, &l2.W, &l2.b};
    }

    Mat<S> forward(const Mat<S>& x, Cache* cache = nullptr) const {
        Mat<S> pre = l1.forward(x);
        Mat<S> out = l2.forward(silu(pre));
        if (cache) {
            cache->x = x;
            cache->pre = std::move(pre);
            cache->valid = true;
        }
        return out;
    }

    Mat<S> backward(const Cache& cache, const Mat<S>& dy) {
        require(cache.valid, Errc::state, "mlp backward called without a cached forward pass");
        Mat<S> dh = l2.backward(silu(cache.pre), dy);
        dh.array() *= silu_grad(cache.pre).array();
        return l1.backward(cache.x, dh);
    }
};

// ---------------------------------------------------------------------------
// Convolution via im2col
// ---------------------------------------------------------------------------
//
// Feature maps are stored channels-as-rows: X is (C x B*H*W) with column
// index b*H*W + y*W + x. Zero padding of k/2 keeps "same" spatial size at
// stride 1; stride 2 halves each dimension (H, W assumed even there).

inline int conv_out_dim(int n, int stride) { return (n + stride - 1) / stride; }

template <typename S>
Mat<S> im2col(const Mat<S>& x, int batch, int h, int w, int k, int stride) {
    const int c_in = static_cast<int>(x.rows());
    const int pad = k / 2;
    const int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    Mat<S> cols = Mat<S>::Zero(c_in * k * k, static_cast<long>(batch) * oh * ow);
    for (int b = 0; b < batch; ++b) {
        const long in_base = static_cast<long>(b) * h * w;
        const long out_base = static_cast<long>(b) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const long col = out_base + static_cast<long>(oy) * ow + ox;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        cols.block(static_cast<long>(ky * k + kx) * c_in, col, c_in, 1) =
                            x.col(in_base + static_cast<long>(iy) * w + ix);
                    }
                }
            }
        }
    }
    return cols;
}

/// Adjoint of im2col (scatter-add back to the input layout).
template <typename S>
Mat<S> col2im(const Mat<S>& cols, int c_in, int batch, int h, int w, int k, int stride) {
    const int pad = k / 2;
    const int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    Mat<S> x = Mat<S>::Zero(c_in, static_cast<long>(batch) * h * w);
    for (int b = 0; b < batch; ++b) {
        const long in_base = static_cast<long>(b) * h * w;
        const long out_base = static_cast<long>(b) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const long col = out_base + static_cast<long>(oy) * ow + ox;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        x.col(in_base + static_cast<long>(iy) * w + ix) +=
                            cols.block(static_cast<long>(ky * k + kx) * c_in, col, c_in, 1);
                    }
                }
            }
        }
    }
    return x;
}

template <typename S>
struct Conv2d {
    Param<S> W;  // (out_ch x in_ch*k*k); column block order matches im2col rows
    Param<S> b;
    int in_ch = 0, out_ch = 0, k = 3, stride = 1;

    struct Cache {
        Mat<S> cols;
        int batch = 0, h = 0, w = 0;
        bool valid = false;
    };

    void init(const std::string& name, int in, int out, int ksize, int stride_, Rng& rng,
              double gain = 1.0) {
        in_ch = in;
        out_ch = out;
        k = ksize;
        stride = stride_;
        W.init_gaussian(name + ".W", out, in * ksize * ksize, rng,
                        gain / std::sqrt(static_cast<double>(in * ksize * ksize)));
        b.init(name + ".b", out, 1);
    }

    ParamRefs<S> parameters() { return {&W, &b}; }

    Mat<S> forward(const Mat<S>& x, int batch, int h, int w, Cache* cache = nullptr) const {
        Mat<S> cols = im2col(x, batch, h, w, k, stride);
        Mat<S> y = (W.w * cols).colwise() + b.w.col(0);
        if (cache) {
            cache->cols = std::move(cols);
            cache->batch = batch;
            cache->h = h;
            cache->w = w;
            cache->valid = true;
        }
        return y;
    }

    Mat<S> backward(const Cache& cache, const Mat<S>& dy) {
        require(cache.valid, Errc::state, "conv backward called without a cached forward pass");
        W.g.noalias() += dy * cache.cols.transpose();
        b.g.col(0) += dy.rowwise().sum();
        Mat<S> dcols = W.w.transpose() * dy;
        return col2im(dcols, in_ch, cache.batch, cache.h, cache.w, k, stride);
    }
};

// ---------------------------------------------------------------------------
// Spatial resampling
// ---------------------------------------------------------------------------

template <typename S>
Mat<S> upsample_nearest2(const Mat<S>& x, int batch, int h, int w) {
    Mat<S> y(x.rows(), static_cast<long>(batch) * (2 * h) * (2 * w));
    for (int b = 0; b < batch; ++b)
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
                y.col(static_cast<long>(b) * 4 * h * w + static_cast<long>(yy) * 2 * w + xx) =
                    x.col(static_cast<long>(b) * h * w + static_cast<long>(yy / 2) * w + xx / 2);
    return y;
}

template <typename S>
Mat<S> upsample_nearest2_backward(const Mat<S>& dy, int batch, int h, int w) {
    Mat<S> dx = Mat<S>::Zero(dy.rows(), static_cast<long>(batch) * h * w);
    for (int b = 0; b < batch; ++b)
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
                dx.col(static_cast<long>(b) * h * w + static_cast<long>(yy / 2) * w + xx / 2) +=
                    dy.col(static_cast<long>(b) * 4 * h * w + static_cast<long>(yy) * 2 * w + xx);
    return dx;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Classic Adam with bias correction; operates in-place on a parameter list.
template <typename S>
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Mat<S>> m, v;

    void reset(const ParamRefs<S>& params) {
        t = 0;
        m.clear();
        v.clear();
        for (auto* p : params) {
            m.push_back(Mat<S>::Zero(p->w.rows(), p->w.cols()));
            v.push_back(Mat<S>::Zero(p->w.rows(), p->w.cols()));
        }
    }

    void step(const ParamRefs<S>& params) {
        require(m.size() == params.size(), Errc::state, "adam state does not match parameter list");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            m[i] = static_cast<S>(beta1) * m[i] + static_cast<S>(1.0 - beta1) * p.g;
            v[i] = (static_cast<S>(beta2) * v[i].array() +
                    static_cast<S>(1.0 - beta2) * p.g.array().square())
                       .matrix();
            const S a = static_cast<S>(lr / bc1);
            p.w.array() -=
                a * m[i].array() / ((v[i].array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(eps));
        }
    }
};

}  // namespace stitchdiff
