#pragma once

#include <cmath>
#include <vector>

#include "stitchdiff/image.hpp"

namespace stitchdiff {

/// Forward-process variance schedule. Defaults are the standard linear DDPM
/// schedule; desk-scale configs shrink T and rescale beta_end so alpha_bar_T
/// still lands near zero.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    static NoiseSchedule linear(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02) {
        require(T >= 2, Errc::config, "schedule: T must be >= 2");
        require(beta_start > 0 && beta_end < 1 && beta_start <= beta_end, Errc::config,
                "schedule: need 0 < beta_start <= beta_end < 1");
        NoiseSchedule s;
        s.T = T;
        s.betas.resize(static_cast<std::size_t>(T));
        s.alphas.resize(static_cast<std::size_t>(T));
        s.alpha_bars.resize(static_cast<std::size_t>(T));
        double bar = 1.0;
        for (int t = 0; t < T; ++t) {
            const double beta = beta_start + (beta_end - beta_start) * t / (T - 1);
            s.betas[static_cast<std::size_t>(t)] = beta;
            s.alphas[static_cast<std::size_t>(t)] = 1.0 - beta;
            bar *= 1.0 - beta;
            s.alpha_bars[static_cast<std::size_t>(t)] = bar;
        }
        return s;
    }

    void check_t(int t, const char* where) const {
        require(t >= 0 && t < T, Errc::range, where);
    }

    double alpha_bar(int t) const {
        check_t(t, "schedule: t out of range");
        return alpha_bars[static_cast<std::size_t>(t)];
    }
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps. Lives in noise
/// space; no clamping.
template <typename S>
Image<S> q_sample(const Image<S>& x0, int t, const Image<S>& eps, const NoiseSchedule& schedule) {
    schedule.check_t(t, "q_sample: t out of range");
    check_same_shape(x0, eps, "q_sample: x0/eps shape");
    const S a = static_cast<S>(std::sqrt(schedule.alpha_bar(t)));
    const S b = static_cast<S>(std::sqrt(1.0 - schedule.alpha_bar(t)));
    Image<S> out = x0;
    for (int c = 0; c < out.channels(); ++c) out.planes[c] = a * x0.planes[c] + b * eps.planes[c];
    return out;
}

/// Inverts q_sample given a noise estimate, clamped to the image range:
/// x0_hat = clamp((x_t - sqrt(1-alpha_bar_t) eps_hat) / sqrt(alpha_bar_t)).
template <typename S>
Image<S> reconstruct_x0(const Image<S>& x_t, const Image<S>& eps_hat, int t,
                        const NoiseSchedule& schedule) {
    schedule.check_t(t, "reconstruct_x0: t out of range");
    check_same_shape(x_t, eps_hat, "reconstruct_x0: x_t/eps_hat shape");
    const S a = static_cast<S>(std::sqrt(schedule.alpha_bar(t)));
    const S b = static_cast<S>(std::sqrt(1.0 - schedule.alpha_bar(t)));
    Image<S> out = x_t;
    for (int c = 0; c < out.channels(); ++c) out.planes[c] = (x_t.planes[c] - b * eps_hat.planes[c]) / a;
    return out.clamp01();
}

}  // namespace stitchdiff
