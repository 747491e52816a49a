#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stitchdiff/prior.hpp"
#include "support/tinymodel.hpp"

using namespace stitchdiff;

namespace {

ImageD textured_scene(Rng& rng, int n = 16) {
    ImageD img(n, n, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                img.at(y, x, c) = 0.5 + 0.4 * std::sin(0.9 * x + c) * std::cos(1.3 * y) +
                                  0.05 * (rng.uniform() - 0.5);
    img.clamp01();
    return img;
}

Mask center_mask(int n = 16, int margin = 4) {
    Mask m(n, n, 0);
    for (int y = margin; y < n - margin + 2; ++y)
        for (int x = margin; x < n - margin + 2; ++x) m.data(y, x) = 1;
    return m;
}

/// Standardized HF map over mask pixels, recomputed independently.
Eigen::ArrayXXd standardized_hf(const ImageD& source, const Mask& mask, const HfConfig& hf_cfg) {
    ImageD hf = high_frequency(source, hf_cfg);
    double sum = 0, sum2 = 0;
    long n = 0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x)) {
                sum += hf.at(y, x, 0);
                sum2 += hf.at(y, x, 0) * hf.at(y, x, 0);
                ++n;
            }
    const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
    Eigen::ArrayXXd z(mask.height(), mask.width());
    z.setZero();
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x)) z(y, x) = (hf.at(y, x, 0) - mean) / sd;
    return z;
}

double mask_correlation(const ImageD& fused, const Eigen::ArrayXXd& z, const Mask& mask) {
    // Pearson correlation over mask pixels, channel 0.
    std::vector<double> a, b;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.data(y, x)) {
                a.push_back(fused.at(y, x, 0));
                b.push_back(z(y, x));
            }
    const long n = static_cast<long>(a.size());
    double ma = 0, mb = 0;
    for (long i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (long i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("fuse_training: disabled, low-t, and lambda=0 are exact identities") {
    Rng rng(1);
    ImageD scene = textured_scene(rng);
    Mask mask = center_mask();
    ImageD eps = noise_like<double>(16, 16, 3, rng);
    HfConfig hf;

    PriorConfig off;
    off.enabled = false;
    CHECK(max_abs_diff(fuse_training(eps, scene, mask, off, hf, 900), eps) == 0.0);

    PriorConfig on;
    CHECK(max_abs_diff(fuse_training(eps, scene, mask, on, hf, 500), eps) == 0.0);  // t < 800

    PriorConfig zero;
    zero.lambda = 0.0;
    CHECK(max_abs_diff(fuse_training(eps, scene, mask, zero, hf, 900), eps) == 0.0);
}

TEST_CASE("fuse_training: lambda=1 replaces the masked region with the standardized HF map") {
    Rng rng(2);
    ImageD scene = textured_scene(rng);
    Mask mask = center_mask();
    ImageD eps = noise_like<double>(16, 16, 3, rng);
    HfConfig hf;
    PriorConfig cfg;
    cfg.lambda = 1.0;

    ImageD fused = fuse_training(eps, scene, mask, cfg, hf, 950);
    auto z = standardized_hf(scene, mask, hf);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                if (mask.data(y, x))
                    CHECK(fused.at(y, x, c) == doctest::Approx(z(y, x)).epsilon(1e-9));
                else
                    CHECK(fused.at(y, x, c) == eps.at(y, x, c));
            }
}

TEST_CASE("fuse_*: pixels outside the mask never change") {
    Rng rng(3);
    HfConfig hf;
    PriorConfig cfg;
    cfg.lambda = 0.37;
    for (int trial = 0; trial < 10; ++trial) {
        ImageD bg = textured_scene(rng);
        Mask mask(16, 16, 0);
        for (int i = 0; i < 40; ++i)
            mask.data(static_cast<int>(rng.below(16)), static_cast<int>(rng.below(16))) = 1;
        ImageD noise = noise_like<double>(16, 16, 3, rng);
        ImageD fused = fuse_inference(noise, bg, mask, cfg, hf);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if (!mask.data(y, x))
                    for (int c = 0; c < 3; ++c) CHECK(fused.at(y, x, c) == noise.at(y, x, c));
    }
}

TEST_CASE("fuse_inference: empty mask and degenerate HF fall back to identity") {
    Rng rng(4);
    ImageD bg = textured_scene(rng);
    ImageD noise = noise_like<double>(16, 16, 3, rng);
    HfConfig hf;
    PriorConfig cfg;
    cfg.lambda = 0.5;

    Mask empty(16, 16, 0);
    CHECK(max_abs_diff(fuse_inference(noise, bg, empty, cfg, hf), noise) == 0.0);

    // Constant background: HF is all zero -> zero variance over the mask.
    ImageD flat(16, 16, 3, 0.5);
    Mask mask = center_mask();
    CHECK(max_abs_diff(fuse_inference(noise, flat, mask, cfg, hf), noise) == 0.0);
}

TEST_CASE("fuse_inference: lambda=0.5 correlation with Z(HF) is about sqrt(0.5)") {
    Rng seed_rng(5);
    ImageD bg = textured_scene(seed_rng);
    Mask mask = center_mask();
    HfConfig hf;
    auto z = standardized_hf(bg, mask, hf);

    PriorConfig cfg;
    cfg.lambda = 0.5;
    double acc = 0.0;
    const int n_seeds = 20;
    for (int i = 0; i < n_seeds; ++i) {
        Rng rng(1000 + i);
        ImageD noise = noise_like<double>(16, 16, 3, rng);
        ImageD fused = fuse_inference(noise, bg, mask, cfg, hf);
        acc += mask_correlation(fused, z, mask);
    }
    CHECK(acc / n_seeds == doctest::Approx(std::sqrt(0.5)).epsilon(0.15));
    CHECK(std::abs(acc / n_seeds - std::sqrt(0.5)) < 0.1);
}

TEST_CASE("fuse_inference: masked-region correlation is monotone in lambda") {
    Rng seed_rng(6);
    ImageD bg = textured_scene(seed_rng);
    Mask mask = center_mask();
    HfConfig hf;
    auto z = standardized_hf(bg, mask, hf);

    const double lambdas[] = {0.0, 0.1, 0.25, 0.5, 1.0};
    double prev = -2.0;
    for (double lam : lambdas) {
        PriorConfig cfg;
        cfg.lambda = lam;
        double acc = 0.0;
        for (int i = 0; i < 20; ++i) {
            Rng rng(2000 + i);
            ImageD noise = noise_like<double>(16, 16, 3, rng);
            acc += mask_correlation(fuse_inference(noise, bg, mask, cfg, hf), z, mask);
        }
        const double corr = acc / 20.0;
        CHECK(corr > prev);
        prev = corr;
    }
    CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));  // lambda = 1
}

TEST_CASE("fuse variance: sqrt blend approximately preserves unit variance") {
    Rng seed_rng(7);
    ImageD bg = textured_scene(seed_rng);
    Mask mask = center_mask();
    HfConfig hf;
    for (double lam : {0.1, 0.25, 0.5}) {
        PriorConfig cfg;
        cfg.lambda = lam;
        // Second moment pooled over mask pixels and seeds. The fused noise is
        // zero-mean by construction ((1-l)E[eps]=0 and Z standardized over
        // the mask), so this is the variance of the marginal the sampler
        // sees, and the sqrt blend keeps it at (1-l)*1 + l*1 = 1.
        double moment = 0;
        long count = 0;
        for (int i = 0; i < 40; ++i) {
            Rng rng(3000 + i);
            ImageD noise = noise_like<double>(16, 16, 3, rng);
            ImageD f = fuse_inference(noise, bg, mask, cfg, hf);
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    if (mask.data(y, x))
                        for (int c = 0; c < 3; ++c) {
                            moment += f.at(y, x, c) * f.at(y, x, c);
                            ++count;
                        }
        }
        moment /= count;
        CHECK(moment > 0.9);
        CHECK(moment < 1.1);
    }
}
