#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "stitchdiff/modulation.hpp"
#include "support/gradcheck.hpp"

using namespace stitchdiff;

namespace {

FeatureBundle<double> random_bundle(Rng& rng, int dim, int count) {
    FeatureBundle<double> b;
    for (TokenSequence<double>* s : {&b.rgb, &b.hf, &b.texture}) {
        s->tokens.resize(dim, count);
        for (int c = 0; c < count; ++c)
            for (int r = 0; r < dim; ++r) s->tokens(r, c) = rng.normal();
    }
    return b;
}

void randomize(ModulationNet<double>& net, Rng& rng, double scale = 0.05) {
    for (auto* p : net.parameters())
        for (long c = 0; c < p->w.cols(); ++c)
            for (long r = 0; r < p->w.rows(); ++r) p->w(r, c) += rng.normal() * scale;
}

/// Straight-line reference for Eqs. 4-8: explicit loops, no shared code with
/// the implementation's Eigen expressions.
Mat<double> reference_modulate(const FeatureBundle<double>& bundle, const Vec<double>& h,
                               const ModulationNet<double>& net, double alpha, double beta) {
    auto mlp = [](const Mlp2<double>& m, const Vec<double>& x) {
        Vec<double> a = m.l1.W.w * x + m.l1.b.w.col(0);
        for (long i = 0; i < a.size(); ++i) a(i) = a(i) / (1.0 + std::exp(-a(i)));
        return Vec<double>(m.l2.W.w * a + m.l2.b.w.col(0));
    };
    const int d = net.cond_dim;
    Vec<double> ssvm = mlp(net.ssvm, h);
    Vec<double> logits = mlp(net.fwvm, h);
    Vec<double> adjust = mlp(net.favm, h);
    double mx = std::max({logits(0), logits(1), logits(2)});
    double z = 0.0;
    Vec<double> w(3);
    for (int k = 0; k < 3; ++k) z += std::exp(logits(k) - mx);
    for (int k = 0; k < 3; ++k) w(k) = std::exp(logits(k) - mx) / z;

    const TokenSequence<double>* streams[3] = {&bundle.rgb, &bundle.hf, &bundle.texture};
    Mat<double> out = Mat<double>::Zero(d, bundle.rgb.count());
    for (int k = 0; k < 3; ++k)
        for (int tok = 0; tok < bundle.rgb.count(); ++tok)
            for (int i = 0; i < d; ++i) {
                const double s = 1.0 + ssvm(2 * k * d + i);
                const double b = ssvm((2 * k + 1) * d + i);
                out(i, tok) += w(k) * (streams[k]->tokens(i, tok) * (alpha * s) + beta * b);
            }
    for (int tok = 0; tok < bundle.rgb.count(); ++tok)
        for (int i = 0; i < d; ++i) out(i, tok) += adjust(i);
    return out;
}

}  // namespace

TEST_CASE("sincos_encode: t=0, bounds, and the dim=4 closed form") {
    auto v0 = sincos_encode<double>(0, 320);
    for (int i = 0; i < 160; ++i) {
        CHECK(v0(i) == 0.0);
        CHECK(v0(160 + i) == 1.0);
    }
    auto v1 = sincos_encode<double>(1, 4);
    CHECK(v1(0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(v1(1) == doctest::Approx(std::sin(0.01)).epsilon(1e-15));
    CHECK(v1(2) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    CHECK(v1(3) == doctest::Approx(std::cos(0.01)).epsilon(1e-15));
    for (long t : {3L, 999L, 123456L}) {
        auto v = sincos_encode<double>(t, 64);
        CHECK(v.cwiseAbs().maxCoeff() <= 1.0);
    }
    CHECK_THROWS_WITH_AS(sincos_encode<double>(1, 5), doctest::Contains("config"), Error);
}

TEST_CASE("embed_timestep: deterministic; zero output layer collapses to the bias") {
    Rng rng(1);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 64, rng);
    auto a = embed_timestep(7, net);
    auto b = embed_timestep(7, net);
    CHECK(a.h == b.h);

    net.embed.l2.W.w.setZero();
    net.embed.l2.b.w.setConstant(0.25);
    auto h0 = embed_timestep(0, net);
    auto h9 = embed_timestep(9, net);
    CHECK(h0.h == h9.h);
    CHECK(h0.h(0) == 0.25);
}

TEST_CASE("embed_timestep: distinct t give distinct embeddings") {
    Rng rng(2);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 64, rng);
    std::set<std::pair<double, double>> seen;
    for (long t = 0; t < 1000; ++t) {
        auto h = embed_timestep(t, net);
        CHECK(seen.insert({h.h(0), h.h(1)}).second);
    }
}

TEST_CASE("modulate: freshly initialized net is the identity rig (stream mean)") {
    Rng rng(3);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 16, rng);  // heads zero-initialized
    FeatureBundle<double> bundle = random_bundle(rng, 16, 5);
    auto h = embed_timestep(42, net);

    auto params = modulation_params(net, h, 1.0, 1.0);
    for (int k = 0; k < 3; ++k) {
        CHECK((params.scale[k].array() == 1.0).all());
        CHECK((params.shift[k].array() == 0.0).all());
    }
    CHECK((params.adjust.array() == 0.0).all());
    CHECK(params.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

    auto out = modulate(bundle, h, net, 1.0, 1.0);
    Mat<double> mean = (bundle.rgb.tokens + bundle.hf.tokens + bundle.texture.tokens) / 3.0;
    CHECK((out.tokens - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modulate: identical streams make the output independent of the fusion weights") {
    Rng rng(4);
    const int d = 8;
    ModulationNet<double> net;
    net.init(ModulationConfig{}, d, rng);
    randomize(net, rng);
    // Share the scale/shift slot of stream 0 across all three streams, so
    // F_k^mod are identical and convexity makes w_k irrelevant.
    for (int k = 1; k < 3; ++k) {
        net.ssvm.l2.W.w.middleRows(2 * k * d, 2 * d) = net.ssvm.l2.W.w.middleRows(0, 2 * d);
        net.ssvm.l2.b.w.block(2 * k * d, 0, 2 * d, 1) = net.ssvm.l2.b.w.block(0, 0, 2 * d, 1);
    }
    FeatureBundle<double> b = random_bundle(rng, d, 4);
    b.hf = b.rgb;
    b.texture = b.rgb;
    auto h = embed_timestep(100, net);

    ModulationNet<double> net2 = net;
    net2.fwvm.l2.W.w.setZero();
    net2.fwvm.l2.b.w.col(0) << 3.0, -1.0, 0.5;  // very non-uniform weights
    auto o1 = modulate(b, h, net, 1.0, 1.0);
    auto o2 = modulate(b, h, net2, 1.0, 1.0);
    CHECK((o1.tokens - o2.tokens).cwiseAbs().maxCoeff() < 1e-12);

    // And the value is the single modulated-then-adjusted stream.
    auto params = modulation_params(net, h, 1.0, 1.0);
    Mat<double> want = (b.rgb.tokens.array().colwise() * params.scale[0].array()).matrix();
    want.colwise() += params.shift[0];
    want.colwise() += params.adjust;
    CHECK((o1.tokens - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("modulate: matches the straight-line reference on a random net") {
    Rng rng(5);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 24, rng);
    randomize(net, rng);
    FeatureBundle<double> b = random_bundle(rng, 24, 7);
    auto h = embed_timestep(321, net);
    auto out = modulate(b, h, net, 1.3, 0.7);
    Mat<double> want = reference_modulate(b, h.h, net, 1.3, 0.7);
    REQUIRE(out.tokens.rows() == want.rows());
    REQUIRE(out.tokens.cols() == want.cols());
    CHECK((out.tokens - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modulate: softmax weights sum to one for random timesteps and nets") {
    Rng rng(6);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 8, rng);
    randomize(net, rng, 0.05);
    for (int i = 0; i < 200; ++i) {
        const long t = static_cast<long>(rng.below(1000));
        auto p = modulation_params(net, embed_timestep(t, net), 1.0, 1.0);
        CHECK(std::abs(p.weights.sum() - 1.0) <= 1e-6);
        for (int k = 0; k < 3; ++k) CHECK(p.weights(k) > 0.0);
    }
}

TEST_CASE("modulate: output shape equals stream shape for random shapes") {
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const int dim = 2 * (1 + static_cast<int>(rng.below(24)));
        const int count = 1 + static_cast<int>(rng.below(40));
        ModulationNet<double> net;
        net.init(ModulationConfig{}, dim, rng);
        randomize(net, rng);
        FeatureBundle<double> b = random_bundle(rng, dim, count);
        auto out = modulate(b, embed_timestep(5, net), net, 1.0, 1.0);
        CHECK(out.dim() == dim);
        CHECK(out.count() == count);
    }
}

TEST_CASE("modulate: stream dim mismatch and missing cache raise errors") {
    Rng rng(8);
    ModulationNet<double> net;
    net.init(ModulationConfig{}, 8, rng);
    FeatureBundle<double> b = random_bundle(rng, 8, 4);
    b.hf.tokens.resize(10, 4);
    b.hf.tokens.setZero();
    CHECK_THROWS_WITH_AS(modulate(b, embed_timestep(1, net), net, 1.0, 1.0),
                         doctest::Contains("shape_mismatch"), Error);

    ModulationCache<double> cache;  // never filled
    Mat<double> d_out = Mat<double>::Zero(8, 4);
    CHECK_THROWS_WITH_AS(modulate_backward(net, cache, 1.0, 1.0, d_out),
                         doctest::Contains("state"), Error);
}

TEST_CASE("modulation gradients match central finite differences") {
    Rng rng(9);
    const int dim = 12, count = 6;
    ModulationNet<double> net;
    net.init(ModulationConfig{}, dim, rng);
    randomize(net, rng);
    FeatureBundle<double> bundle = random_bundle(rng, dim, count);
    const long t = 250;

    // Loss: weighted sum of the modulated output entries (fixed weights).
    Mat<double> probe(dim, count);
    for (int c = 0; c < count; ++c)
        for (int r = 0; r < dim; ++r) probe(r, c) = rng.normal();

    auto loss = [&]() {
        auto h = embed_timestep(t, net);
        auto out = modulate(bundle, h, net, 1.1, 0.9);
        return (out.tokens.array() * probe.array()).sum();
    };

    auto params = net.parameters();
    zero_grads(params);
    EmbedCache<double> ec;
    auto h = embed_timestep(t, net, &ec);
    ModulationCache<double> mc;
    modulate(bundle, h, net, 1.1, 0.9, &mc);
    auto grads = modulate_backward(net, mc, 1.1, 0.9, probe);
    embed_timestep_backward(net, ec, grads.d_h);

    auto results = gradcheck::probe_all(params, loss, 1e-5, 1e-4);
    for (const auto& r : results) {
        INFO(r.name << "(" << r.row << "," << r.col << ") analytic=" << r.analytic
                    << " numeric=" << r.numeric);
        CHECK(r.ok);
    }
    CHECK(results.size() >= 16);

    // Stream gradients via finite differences on one entry per stream.
    const TokenSequence<double>* streams[3] = {&bundle.rgb, &bundle.hf, &bundle.texture};
    for (int k = 0; k < 3; ++k) {
        auto* tok = const_cast<Mat<double>*>(&streams[k]->tokens);
        const double orig = (*tok)(3, 2);
        const double h_step = 1e-6;
        (*tok)(3, 2) = orig + h_step;
        const double lp = loss();
        (*tok)(3, 2) = orig - h_step;
        const double lm = loss();
        (*tok)(3, 2) = orig;
        const double fd = (lp - lm) / (2 * h_step);
        CHECK(gradcheck::rel_err(grads.d_streams[k](3, 2), fd) < 1e-4);
    }

    // Zero upstream gradient zeroes every parameter gradient.
    zero_grads(params);
    ModulationCache<double> mc2;
    auto h2 = embed_timestep(t, net, &ec);
    modulate(bundle, h2, net, 1.1, 0.9, &mc2);
    Mat<double> zero_up = Mat<double>::Zero(dim, count);
    auto g2 = modulate_backward(net, mc2, 1.1, 0.9, zero_up);
    embed_timestep_backward(net, ec, g2.d_h);
    for (auto* p : params) CHECK(p->g.cwiseAbs().maxCoeff() == 0.0);

    // Softmax Jacobian property: the logits gradient sums to zero. The FWVM
    // output bias gradient equals the logits gradient directly.
    zero_grads(params);
    ModulationCache<double> mc3;
    auto h3 = embed_timestep(t, net, &ec);
    modulate(bundle, h3, net, 1.1, 0.9, &mc3);
    modulate_backward(net, mc3, 1.1, 0.9, probe);
    CHECK(std::abs(net.fwvm.l2.b.g.sum()) < 1e-12);
}
