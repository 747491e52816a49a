#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stitchdiff/denoiser.hpp"
#include "stitchdiff/edges.hpp"
#include "stitchdiff/encoder.hpp"
#include "stitchdiff/losses.hpp"
#include "stitchdiff/modulation.hpp"
#include "stitchdiff/prior.hpp"
#include "stitchdiff/synth.hpp"

namespace stitchdiff {

struct ScheduleConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct TrainConfig {
    int steps = 500;
    int batch_size = 8;
    double lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct EvalConfig {
    int samples_per_pairing = 4;
    int pairings_per_shape = 1;
    double neutral_value = 0.5;
    int downstream_per_class = 8;  // generated training images per class
};

struct AblationConfig {
    int train_steps = 200;
    int samples_per_pairing = 2;
    int pairings_per_shape = 1;
};

/// The single JSON configuration document. Every key has a documented
/// default (see default_json()); unknown keys are rejected with the full
/// list of offending paths.
struct RunConfig {
    std::uint64_t seed = 0;
    HfConfig hf;
    EncoderConfig encoder;
    ModulationConfig modulation;
    int denoiser_base_width = 32;
    int denoiser_temb_dim = 128;
    ScheduleConfig schedule;
    LossConfig loss;
    PriorConfig prior;
    TrainConfig train;
    DatasetConfig dataset;
    EvalConfig eval;
    AblationConfig ablation;

    DenoiserConfig denoiser_config() const {
        DenoiserConfig d;
        d.in_channels = 3;
        d.base_width = denoiser_base_width;
        d.temb_dim = denoiser_temb_dim;
        d.cond_dim = encoder.dim;  // condition tokens come from the encoder
        return d;
    }

    static nlohmann::json default_json();

    /// Parses and validates; missing keys take defaults (paths reported via
    /// `defaulted` when non-null), unknown keys raise Errc::config listing
    /// every offending key.
    static RunConfig from_json(const nlohmann::json& j,
                               std::vector<std::string>* defaulted = nullptr);

    /// Loads from a JSON file; an empty path yields pure defaults.
    static RunConfig load(const std::string& path, std::vector<std::string>* defaulted = nullptr);

    nlohmann::json to_json() const;
    void validate() const;
};

}  // namespace stitchdiff
