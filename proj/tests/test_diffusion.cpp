#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stitchdiff/sampler.hpp"
#include "stitchdiff/schedule.hpp"
#include "stitchdiff/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/tinymodel.hpp"

using namespace stitchdiff;

TEST_CASE("schedule: defaults satisfy the invariants") {
    NoiseSchedule s = NoiseSchedule::linear();
    REQUIRE(s.T == 1000);
    CHECK(s.alpha_bar(0) >= 0.99);
    for (int t = 0; t < s.T; ++t) {
        CHECK(s.betas[t] > 0.0);
        CHECK(s.betas[t] < 1.0);
        if (t > 0) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(s.T - 1) < 5e-5);
    CHECK_THROWS_WITH_AS(s.check_t(1000, "x"), doctest::Contains("range"), Error);
    CHECK_THROWS_WITH_AS(s.check_t(-1, "x"), doctest::Contains("range"), Error);
}

TEST_CASE("q_sample: endpoint behavior and the closed-form fixture") {
    NoiseSchedule s = NoiseSchedule::linear();
    Rng rng(1);
    ImageD x0 = tinymodel::random_x0<double>(rng);
    ImageD eps = noise_like<double>(8, 8, 3, rng);

    ImageD at0 = q_sample(x0, 0, eps, s);
    CHECK(max_abs_diff(at0, x0) < 1e-2 * (1.0 + eps.planes[0].abs().maxCoeff()));

    ImageD zero(8, 8, 3, 0.0);
    ImageD noiseless = q_sample(x0, 123, zero, s);
    const double a = std::sqrt(s.alpha_bar(123));
    // One-ulp slack: the compiler may fuse a*x0 + b*0 into an fma.
    for (int c = 0; c < 3; ++c)
        CHECK((noiseless.planes[c] - a * x0.planes[c]).abs().maxCoeff() < 1e-15);

    // Golden fixture: direct per-pixel evaluation at t=500.
    ImageD got = q_sample(x0, 500, eps, s);
    const double a5 = std::sqrt(s.alpha_bar(500)), b5 = std::sqrt(1.0 - s.alpha_bar(500));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                CHECK(got.at(y, x, c) ==
                      doctest::Approx(a5 * x0.at(y, x, c) + b5 * eps.at(y, x, c)).epsilon(1e-14));

    CHECK_THROWS_WITH_AS(q_sample(x0, 1000, eps, s), doctest::Contains("range"), Error);
}

TEST_CASE("reconstruct_x0: inverts q_sample with the true noise") {
    NoiseSchedule s = NoiseSchedule::linear();
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        ImageD x0 = tinymodel::random_x0<double>(rng);
        ImageD eps = noise_like<double>(8, 8, 3, rng);
        const int t = static_cast<int>(rng.below(1000));
        ImageD xt = q_sample(x0, t, eps, s);
        ImageD rec = reconstruct_x0(xt, eps, t, s);
        CHECK(max_abs_diff(rec, x0) < 1e-5);
    }

    ImageD x0 = tinymodel::random_x0<double>(rng);
    ImageD zero(8, 8, 3, 0.0);
    ImageD xt = q_sample(x0, 0, zero, s);
    ImageD rec = reconstruct_x0(xt, zero, 0, s);
    CHECK(max_abs_diff(rec, xt) < 1e-3);

    // Output is clamped into [0,1].
    ImageD big(8, 8, 3, 1.0);
    ImageD neg_eps(8, 8, 3, -3.0);
    ImageD r = reconstruct_x0(big, neg_eps, 900, s);
    for (const auto& p : r.planes) {
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.maxCoeff() <= 1.0);
    }
}

TEST_CASE("denoiser: zero-initialized output conv predicts zero; deterministic; shape-preserving") {
    auto f = tinymodel::make<double>(3, /*jitter=*/false);
    Rng rng(4);
    ImageD x = tinymodel::random_x0<double>(rng);
    auto cond = f.bundle.rgb;
    ImageD out = predict_eps(x, 10, cond, f.model);
    REQUIRE(out.height() == 8);
    REQUIRE(out.width() == 8);
    REQUIRE(out.channels() == 3);
    for (const auto& p : out.planes) CHECK(p.abs().maxCoeff() == 0.0);

    auto fj = tinymodel::make<double>(3);
    ImageD o1 = predict_eps(x, 10, cond, fj.model);
    ImageD o2 = predict_eps(x, 10, cond, fj.model);
    CHECK(max_abs_diff(o1, o2) == 0.0);
    CHECK(o1.planes[0].abs().maxCoeff() > 0.0);
}

TEST_CASE("denoiser: swapping the condition changes the output") {
    auto f = tinymodel::make<double>(5);
    Rng rng(6);
    ImageD x = tinymodel::random_x0<double>(rng);
    ImageD a = predict_eps(x, 100, f.bundle.rgb, f.model);
    ImageD b = predict_eps(x, 100, f.bundle.hf, f.model);
    double l2 = 0.0;
    for (int c = 0; c < 3; ++c) l2 += (a.planes[c] - b.planes[c]).square().sum();
    CHECK(l2 > 0.0);
}

TEST_CASE("denoiser: batched forward equals per-item forward") {
    auto f = tinymodel::make<double>(7);
    Rng rng(8);
    ImageD xa = tinymodel::random_x0<double>(rng);
    ImageD xb = tinymodel::random_x0<double>(rng);
    Mat<double> xs(3, 2 * 64);
    xs.leftCols(64) = image_to_cols(xa);
    xs.rightCols(64) = image_to_cols(xb);
    std::vector<Mat<double>> conds = {f.bundle.rgb.tokens, f.bundle.texture.tokens};
    Mat<double> batched = f.model.forward(xs, {11, 402}, conds, 2, 8, 8);
    ImageD ia = predict_eps(xa, 11, f.bundle.rgb, f.model);
    ImageD ib = predict_eps(xb, 402, f.bundle.texture, f.model);
    CHECK((batched.leftCols(64) - image_to_cols(ia)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batched.rightCols(64) - image_to_cols(ib)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("denoiser gradients match central finite differences") {
    auto f = tinymodel::make<double>(9);
    Rng rng(10);
    ImageD xa = tinymodel::random_x0<double>(rng);
    ImageD xb = tinymodel::random_x0<double>(rng);
    Mat<double> xs(3, 2 * 64);
    xs.leftCols(64) = image_to_cols(xa);
    xs.rightCols(64) = image_to_cols(xb);
    std::vector<long> ts = {40, 900};
    std::vector<Mat<double>> conds = {f.bundle.rgb.tokens, f.bundle.hf.tokens};

    Mat<double> probe(3, 2 * 64);
    for (long c = 0; c < probe.cols(); ++c)
        for (long r = 0; r < probe.rows(); ++r) probe(r, c) = rng.normal();

    auto loss = [&]() {
        Mat<double> out = f.model.forward(xs, ts, conds, 2, 8, 8);
        return (out.array() * probe.array()).sum();
    };

    auto params = f.model.parameters();
    zero_grads(params);
    typename Denoiser<double>::Cache cache;
    f.model.forward(xs, ts, conds, 2, 8, 8, &cache);
    std::vector<Mat<double>> dconds;
    Mat<double> dx = f.model.backward(cache, probe, &dconds);

    auto results = gradcheck::probe_all(params, loss, 1e-5, 1e-4);
    CHECK(results.size() >= 40);
    for (const auto& r : results) {
        INFO(r.name << "(" << r.row << "," << r.col << ") analytic=" << r.analytic
                    << " numeric=" << r.numeric);
        CHECK(r.ok);
    }

    // Input and condition gradients against finite differences.
    {
        const double h = 1e-6;
        const double orig = xs(1, 37);
        xs(1, 37) = orig + h;
        const double lp = loss();
        xs(1, 37) = orig - h;
        const double lm = loss();
        xs(1, 37) = orig;
        CHECK(gradcheck::rel_err(dx(1, 37), (lp - lm) / (2 * h)) < 1e-4);

        const double co = conds[1](4, 3);
        conds[1](4, 3) = co + h;
        const double cp = loss();
        conds[1](4, 3) = co - h;
        const double cm = loss();
        conds[1](4, 3) = co;
        CHECK(gradcheck::rel_err(dconds[1](4, 3), (cp - cm) / (2 * h)) < 1e-4);
    }
}

TEST_CASE("sampler: all-zero mask reproduces the background; seeded runs are identical") {
    auto f = tinymodel::make<double>(11);
    f.model.trained = true;
    NoiseSchedule s = NoiseSchedule::linear(40, 1e-3, 0.3);
    auto enc_cfg = EncoderConfig{};
    enc_cfg.image_size = 8;
    enc_cfg.patch = 4;
    enc_cfg.dim = 16;
    enc_cfg.hidden = 16;
    auto enc = EncoderWeights<double>::make(enc_cfg, 77);

    Rng rng(12);
    GenerationRequest<double> req;
    req.background = tinymodel::random_x0<double>(rng);
    req.mask = Mask(8, 8, 0);
    req.seed = 5;
    req.prior.enabled = false;
    req.prior.high_noise_t = 30;
    ReferenceSet<double> refs;
    refs.id = "probe";
    for (int v = 0; v < 3; ++v) {
        RefView<double> view;
        view.image = tinymodel::random_x0<double>(rng);
        view.mask = Mask(8, 8, 1);
        refs.views.push_back(view);
    }
    req.refs = refs;

    ImageD out = sample(req, f.model, s, f.modulation, enc);
    CHECK(max_abs_diff(out, req.background) == 0.0);

    // With a real mask: outside pixels exact, deterministic across runs, and
    // batching does not change the result.
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) req.mask.data(y, x) = 1;
    ImageD o1 = sample(req, f.model, s, f.modulation, enc);
    ImageD o2 = sample(req, f.model, s, f.modulation, enc);
    CHECK(max_abs_diff(o1, o2) == 0.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (!req.mask.data(y, x))
                for (int c = 0; c < 3; ++c) CHECK(o1.at(y, x, c) == req.background.at(y, x, c));

    GenerationRequest<double> req2 = req;
    req2.seed = 6;
    auto outs = sample_batch<double>({req, req2}, f.model, s, f.modulation, enc);
    CHECK(max_abs_diff(outs[0], o1) == 0.0);
    CHECK(max_abs_diff(outs[1], o1) > 0.0);

    f.model.trained = false;
    CHECK_THROWS_WITH_AS(sample(req, f.model, s, f.modulation, enc), doctest::Contains("state"),
                         Error);
}
