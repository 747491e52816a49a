#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stitchdiff/config.hpp"
#include "stitchdiff/eval.hpp"
#include "stitchdiff/sampler.hpp"
#include "stitchdiff/trainer.hpp"

namespace stitchdiff {

using Real = float;

/// Table-4-style component toggles. TFD off drops the HF/texture streams
/// (RGB-only conditioning); TM off replaces timestep modulation with a fixed
/// uniform fusion; POP gates the pose prior; OAL gates the OCR loss weight.
struct AblationToggles {
    bool tfd = true;
    bool tm = true;
    bool pop = true;
    bool oal = true;

    std::string name() const {
        if (!tfd && !tm && !pop && !oal) return "none";
        std::string n;
        if (tfd) n += "tfd";
        if (tm) n += n.empty() ? "tm" : "_tm";
        if (pop) n += n.empty() ? "pop" : "_pop";
        if (oal) n += n.empty() ? "oal" : "_oal";
        return n;
    }
};

/// All seeded components assembled from one RunConfig. Sub-seeds fan out
/// from the global seed via named derivations.
struct Pipeline {
    RunConfig cfg;
    EncoderWeights<Real> encoder;
    ModulationNet<Real> modulation;
    Denoiser<Real> denoiser;
    NoiseSchedule schedule;
    FrozenConvNet<Real> ocr;
    FrozenConvNet<Real> perceptual;

    ParamRefs<Real> checkpoint_params();
};

Pipeline make_pipeline(const RunConfig& cfg);

struct TrainResult {
    std::vector<LossReport> reports;
    std::string checkpoint_base;
};

using LogFn = std::function<void(const std::string&)>;

/// make-dataset: renders the synthetic corpus; returns the manifest path.
std::string cmd_make_dataset(const RunConfig& cfg, const std::string& out_dir);

/// train: full training run over the dataset's train split; writes
/// <checkpoint_base>.bin/.json and a JSON-lines log next to it.
TrainResult cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
                      const std::string& checkpoint_base, const AblationToggles& toggles = {},
                      const LogFn& log = nullptr);

/// Loads a checkpoint (weights + config echo + toggles) into a pipeline.
Pipeline load_checkpoint(const std::string& checkpoint_base, AblationToggles* toggles = nullptr);

/// generate: one composition from explicit inputs; returns the output path.
std::string cmd_generate(const std::string& checkpoint_base, const std::string& background_png,
                         const std::string& mask_png, const std::string& refs_dir,
                         std::uint64_t seed, const std::string& out_png);

/// evaluate: pairing metrics over the test split plus the downstream
/// classifier check; writes the report JSON and returns it.
EvalReport cmd_evaluate(const std::string& checkpoint_base, const std::string& dataset_dir,
                        const std::string& out_json, ClassifierMetrics* downstream = nullptr,
                        const LogFn& log = nullptr);

/// ablate: trains and evaluates the five cumulative toggle configurations
/// and writes the CSV; returns the CSV text.
std::string cmd_ablate(const RunConfig& cfg, const std::string& dataset_dir,
                       const std::string& out_csv, const LogFn& log = nullptr);

// Shared helpers (also used by the acceptance suite).

/// Condition bundle honoring the TFD toggle (RGB-only when off).
FeatureBundle<Real> build_condition_bundle(const ReferenceSet<Real>& refs,
                                           const EncoderWeights<Real>& enc, const HfConfig& hf,
                                           bool tfd);

/// Batched sampling honoring the toggles (TM off = uniform stream mean).
std::vector<Image<Real>> sample_with_toggles(const std::vector<GenerationRequest<Real>>& reqs,
                                             Pipeline& p, const AblationToggles& toggles);

struct DownstreamData {
    Mat<double> train_features;
    std::vector<int> train_labels;
    Mat<double> test_features;
    std::vector<int> test_labels;
    double separability = 0.0;  // least-squares oracle accuracy on real train scenes
};

/// Generates per-class composites from train-split scenes, extracts
/// classifier features, and pairs them with real test-split features.
DownstreamData build_downstream_data(Pipeline& p, const DatasetManifest& manifest,
                                     const std::string& dataset_dir, const AblationToggles& toggles,
                                     int per_class, const LogFn& log = nullptr);

}  // namespace stitchdiff
