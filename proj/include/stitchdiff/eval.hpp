#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stitchdiff/metrics.hpp"

namespace stitchdiff {

/// Per-pairing metric aggregate: one foreground-background combination,
/// averaged over its generated samples.
struct PairingResult {
    std::string shape;
    long scene_id = 0;
    int samples = 0;
    double identity_sim = 0.0;
    double masked_ssim = 0.0;
    double masked_perceptual = 0.0;
};

struct EvalReport {
    std::vector<PairingResult> pairings;
    double identity_sim = 0.0;
    double masked_ssim = 0.0;
    double masked_perceptual = 0.0;

    void aggregate() {
        identity_sim = masked_ssim = masked_perceptual = 0.0;
        if (pairings.empty()) return;
        for (const auto& p : pairings) {
            identity_sim += p.identity_sim;
            masked_ssim += p.masked_ssim;
            masked_perceptual += p.masked_perceptual;
        }
        const double n = static_cast<double>(pairings.size());
        identity_sim /= n;
        masked_ssim /= n;
        masked_perceptual /= n;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["aggregate"] = {{"identity_sim", identity_sim},
                          {"masked_ssim", masked_ssim},
                          {"masked_perceptual", masked_perceptual},
                          {"pairings", pairings.size()}};
        j["pairings"] = nlohmann::json::array();
        for (const auto& p : pairings)
            j["pairings"].push_back({{"shape", p.shape},
                                     {"scene_id", p.scene_id},
                                     {"samples", p.samples},
                                     {"identity_sim", p.identity_sim},
                                     {"masked_ssim", p.masked_ssim},
                                     {"masked_perceptual", p.masked_perceptual}});
        return j;
    }
};

// ---------------------------------------------------------------------------
// Downstream classifier
// ---------------------------------------------------------------------------

struct ClassifierMetrics {
    double accuracy = 0.0;
    double precision = 0.0;  // macro-averaged
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<double> per_class_precision, per_class_recall, per_class_f1;
};

/// Closed-form one-vs-all least-squares fit; returns training accuracy.
/// Used as the separability oracle before trusting classifier results.
double least_squares_separability(const Mat<double>& features, const std::vector<int>& labels,
                                  int num_classes);

/// Multinomial logistic regression on fixed features (full-batch gradient
/// training, deterministic). Throws Errc::coverage when a class is absent
/// from the training set.
ClassifierMetrics downstream_classify(const Mat<double>& train_features,
                                      const std::vector<int>& train_labels,
                                      const Mat<double>& test_features,
                                      const std::vector<int>& test_labels, int num_classes);

/// Classifier features for one scene: mean-pooled tokens of the three
/// decoupled streams of the mask-cropped foreground, concatenated (3*dim).
template <typename S>
Vec<double> classifier_features(const Image<S>& image, const Mask& mask,
                                const EncoderWeights<S>& encoder, const HfConfig& hf_cfg) {
    StreamImages<S> streams = disentangle(image, mask, encoder.cfg, hf_cfg);
    Vec<double> out(3 * encoder.cfg.dim);
    out.segment(0, encoder.cfg.dim) =
        encode(streams.rgb, encoder).mean_pooled().template cast<double>();
    out.segment(encoder.cfg.dim, encoder.cfg.dim) =
        encode(streams.hf, encoder).mean_pooled().template cast<double>();
    out.segment(2 * encoder.cfg.dim, encoder.cfg.dim) =
        encode(streams.texture, encoder).mean_pooled().template cast<double>();
    return out;
}

}  // namespace stitchdiff
