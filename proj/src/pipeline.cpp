#include "stitchdiff/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stitchdiff/png_io.hpp"
#include "stitchdiff/tensorfile.hpp"

namespace fs = std::filesystem;

namespace stitchdiff {

namespace {

void log_line(const LogFn& log, const std::string& line) {
    if (log) log(line);
}

std::vector<TrainItem<Real>> load_train_items(const DatasetManifest& manifest,
                                              const std::string& dataset_dir) {
    std::vector<TrainItem<Real>> items;
    for (const auto* mi : manifest.split_items("train")) {
        TrainItem<Real> item;
        item.scene = read_image_png<Real>(dataset_dir + "/" + mi->image_path);
        item.mask = read_mask_png(dataset_dir + "/" + mi->mask_path);
        item.ref_index = static_cast<int>(mi->spec.shape);
        item.has_text = mi->has_text;
        items.push_back(std::move(item));
    }
    require(!items.empty(), Errc::input, "dataset has no train scenes");
    return items;
}

/// Test-split scenes usable as replacement pairings for one shape.
std::vector<const ManifestItem*> pairing_scenes(const DatasetManifest& manifest,
                                                const std::string& split, ShapeId shape,
                                                int count) {
    std::vector<const ManifestItem*> out;
    for (const auto* mi : manifest.split_items(split)) {
        if (mi->spec.shape != shape || mi->spec.anomaly == Anomaly::missing) continue;
        out.push_back(mi);
        if (static_cast<int>(out.size()) == count) break;
    }
    require(static_cast<int>(out.size()) == count, Errc::input,
            std::string("not enough ") + split + " scenes for shape " + shape_name(shape));
    return out;
}

struct EvalCounts {
    int samples_per_pairing;
    int pairings_per_shape;
    double neutral;
};

EvalReport evaluate_pipeline(Pipeline& p, const AblationToggles& toggles,
                             const DatasetManifest& manifest, const std::string& dataset_dir,
                             const EvalCounts& counts, const LogFn& log) {
    std::vector<ReferenceSet<Real>> refs;
    for (int s = 0; s < kShapeCount; ++s)
        refs.push_back(load_reference_set(dataset_dir, static_cast<ShapeId>(s)));

    // Assemble every request across pairings into one batch.
    std::vector<GenerationRequest<Real>> reqs;
    std::vector<PairingResult> pairings;
    std::vector<const ManifestItem*> pairing_of;
    for (int s = 0; s < kShapeCount; ++s) {
        auto scenes =
            pairing_scenes(manifest, "test", static_cast<ShapeId>(s), counts.pairings_per_shape);
        for (const auto* mi : scenes) {
            PairingResult pr;
            pr.shape = shape_name(static_cast<ShapeId>(s));
            pr.scene_id = mi->id;
            pr.samples = counts.samples_per_pairing;
            pairings.push_back(pr);
            for (int k = 0; k < counts.samples_per_pairing; ++k) {
                GenerationRequest<Real> req;
                req.background = read_image_png<Real>(dataset_dir + "/" + mi->image_path);
                req.mask = read_mask_png(dataset_dir + "/" + mi->mask_path);
                req.refs = refs[static_cast<std::size_t>(s)];
                req.prior = p.cfg.prior;
                req.prior.enabled = p.cfg.prior.enabled && toggles.pop;
                req.hf = p.cfg.hf;
                req.seed = Rng(p.cfg.seed).derive("eval", static_cast<std::uint64_t>(mi->id))
                               .seed_for(std::to_string(k));
                reqs.push_back(std::move(req));
                pairing_of.push_back(mi);
            }
        }
    }

    log_line(log, "{\"event\":\"evaluate\",\"samples\":" + std::to_string(reqs.size()) + "}");
    std::vector<Image<Real>> outs = sample_with_toggles(reqs, p, toggles);

    std::size_t idx = 0;
    for (auto& pr : pairings) {
        double id_sim = 0, mssim = 0, mperc = 0;
        for (int k = 0; k < pr.samples; ++k, ++idx) {
            const GenerationRequest<Real>& req = reqs[idx];
            const Image<Real>& gen = outs[idx];
            id_sim += identity_similarity(gen, req.mask, req.refs, p.encoder);
            MaskedMetrics mm = masked_background_metrics(gen, req.background, req.mask,
                                                         p.perceptual, counts.neutral);
            mssim += mm.ssim;
            mperc += mm.perceptual;
        }
        pr.identity_sim = id_sim / pr.samples;
        pr.masked_ssim = mssim / pr.samples;
        pr.masked_perceptual = mperc / pr.samples;
    }

    EvalReport report;
    report.pairings = std::move(pairings);
    report.aggregate();
    return report;
}

}  // namespace

ParamRefs<Real> Pipeline::checkpoint_params() {
    ParamRefs<Real> params = denoiser.parameters();
    for (auto* p : modulation.parameters()) params.push_back(p);
    return params;
}

Pipeline make_pipeline(const RunConfig& cfg) {
    cfg.validate();
    Pipeline p;
    p.cfg = cfg;
    Rng root(cfg.seed);
    p.encoder = EncoderWeights<Real>::make(cfg.encoder, root.seed_for("encoder"));
    Rng init = root.derive("init");
    p.modulation.init(cfg.modulation, cfg.encoder.dim, init);
    p.denoiser.init(cfg.denoiser_config(), init);
    p.schedule = NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    p.ocr = FrozenConvNet<Real>::make(root.seed_for("ocr"));
    p.perceptual = FrozenConvNet<Real>::make(root.seed_for("perceptual"));
    return p;
}

std::string cmd_make_dataset(const RunConfig& cfg, const std::string& out_dir) {
    build_dataset(cfg.dataset, Rng(cfg.seed).seed_for("dataset"), out_dir);
    return out_dir + "/manifest.json";
}

FeatureBundle<Real> build_condition_bundle(const ReferenceSet<Real>& refs,
                                           const EncoderWeights<Real>& enc, const HfConfig& hf,
                                           bool tfd) {
    return build_bundle(refs, enc, hf, tfd);
}

std::vector<Image<Real>> sample_with_toggles(const std::vector<GenerationRequest<Real>>& reqs,
                                             Pipeline& p, const AblationToggles& toggles) {
    SampleOptions opts;
    opts.use_tfd = toggles.tfd;
    opts.use_tm = toggles.tm;
    return sample_batch(reqs, p.denoiser, p.schedule, p.modulation, p.encoder, opts);
}

TrainResult cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
                      const std::string& checkpoint_base, const AblationToggles& toggles,
                      const LogFn& log) {
    Pipeline p = make_pipeline(cfg);
    DatasetManifest manifest = load_manifest(dataset_dir);
    std::vector<TrainItem<Real>> items = load_train_items(manifest, dataset_dir);

    Trainer<Real> tr;
    tr.use_tfd = toggles.tfd;
    tr.use_tm = toggles.tm;
    LossConfig loss_cfg = cfg.loss;
    if (!toggles.oal) loss_cfg.weight_ocr = 0.0;
    PriorConfig prior_cfg = cfg.prior;
    prior_cfg.enabled = cfg.prior.enabled && toggles.pop;
    Rng root(cfg.seed);
    tr.init(p.denoiser, p.modulation, p.encoder, p.schedule, loss_cfg, prior_cfg, cfg.hf,
            root.seed_for("ocr"), cfg.train.lr, root.derive("train"));
    tr.opt.beta1 = cfg.train.adam_beta1;
    tr.opt.beta2 = cfg.train.adam_beta2;
    tr.opt.eps = cfg.train.adam_eps;
    for (int s = 0; s < kShapeCount; ++s)
        tr.cache_bundle(load_reference_set(dataset_dir, static_cast<ShapeId>(s)));

    const fs::path base_path(checkpoint_base);
    if (base_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(base_path.parent_path(), ec);
    }
    std::ofstream log_file(checkpoint_base + ".train.jsonl", std::ios::binary);
    require(log_file.good(), Errc::io, "cannot open training log: " + checkpoint_base + ".train.jsonl");

    TrainResult result;
    result.checkpoint_base = checkpoint_base;
    for (int step = 0; step < cfg.train.steps; ++step) {
        std::vector<const TrainItem<Real>*> batch;
        for (int b = 0; b < cfg.train.batch_size; ++b)
            batch.push_back(&items[tr.rng.below(items.size())]);
        LossReport report = train_step(tr, batch);
        const std::string line = report.to_json(step).dump();
        log_file << line << "\n";
        log_line(log, line);
        result.reports.push_back(report);
    }
    require(log_file.good(), Errc::io, "short write on training log");
    log_file.close();

    nlohmann::json meta;
    meta["config"] = cfg.to_json();
    meta["toggles"] = {{"tfd", toggles.tfd}, {"tm", toggles.tm}, {"pop", toggles.pop},
                       {"oal", toggles.oal}};
    meta["trained"] = p.denoiser.trained;
    meta["steps"] = cfg.train.steps;
    save_params(checkpoint_base, p.checkpoint_params(), meta);
    return result;
}

Pipeline load_checkpoint(const std::string& checkpoint_base, AblationToggles* toggles) {
    nlohmann::json manifest = read_manifest_json(checkpoint_base);
    const nlohmann::json& meta = manifest.at("meta");
    RunConfig cfg = RunConfig::from_json(meta.at("config"));
    Pipeline p = make_pipeline(cfg);
    load_params(checkpoint_base, p.checkpoint_params());
    p.denoiser.trained = meta.at("trained").get<bool>();
    if (toggles) {
        toggles->tfd = meta.at("toggles").at("tfd").get<bool>();
        toggles->tm = meta.at("toggles").at("tm").get<bool>();
        toggles->pop = meta.at("toggles").at("pop").get<bool>();
        toggles->oal = meta.at("toggles").at("oal").get<bool>();
    }
    return p;
}

std::string cmd_generate(const std::string& checkpoint_base, const std::string& background_png,
                         const std::string& mask_png, const std::string& refs_dir,
                         std::uint64_t seed, const std::string& out_png) {
    AblationToggles toggles;
    Pipeline p = load_checkpoint(checkpoint_base, &toggles);
    GenerationRequest<Real> req;
    req.background = read_image_png<Real>(background_png);
    req.mask = read_mask_png(mask_png);
    req.refs = load_reference_dir(refs_dir);
    req.seed = seed;
    req.prior = p.cfg.prior;
    req.prior.enabled = p.cfg.prior.enabled && toggles.pop;
    req.hf = p.cfg.hf;
    std::vector<Image<Real>> outs = sample_with_toggles({req}, p, toggles);
    const fs::path out_path(out_png);
    if (out_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out_path.parent_path(), ec);
    }
    write_image_png(out_png, outs[0]);
    return out_png;
}

DownstreamData build_downstream_data(Pipeline& p, const DatasetManifest& manifest,
                                     const std::string& dataset_dir, const AblationToggles& toggles,
                                     int per_class, const LogFn& log) {
    std::vector<ReferenceSet<Real>> refs;
    for (int s = 0; s < kShapeCount; ++s)
        refs.push_back(load_reference_set(dataset_dir, static_cast<ShapeId>(s)));

    // Generation sources come from the train split; evaluation scenes from
    // the held-out test split.
    std::vector<GenerationRequest<Real>> reqs;
    std::vector<int> gen_labels;
    for (int s = 0; s < kShapeCount; ++s) {
        auto scenes = pairing_scenes(manifest, "train", static_cast<ShapeId>(s), per_class);
        for (const auto* mi : scenes) {
            GenerationRequest<Real> req;
            req.background = read_image_png<Real>(dataset_dir + "/" + mi->image_path);
            req.mask = read_mask_png(dataset_dir + "/" + mi->mask_path);
            req.refs = refs[static_cast<std::size_t>(s)];
            req.prior = p.cfg.prior;
            req.prior.enabled = p.cfg.prior.enabled && toggles.pop;
            req.hf = p.cfg.hf;
            req.seed = Rng(p.cfg.seed).derive("downstream", static_cast<std::uint64_t>(mi->id))
                           .next_u64();
            reqs.push_back(std::move(req));
            gen_labels.push_back(s);
        }
    }
    log_line(log, "{\"event\":\"downstream_generate\",\"samples\":" + std::to_string(reqs.size()) + "}");
    std::vector<Image<Real>> gen = sample_with_toggles(reqs, p, toggles);

    DownstreamData data;
    data.train_features.resize(3 * p.encoder.cfg.dim, static_cast<long>(gen.size()));
    for (std::size_t i = 0; i < gen.size(); ++i)
        data.train_features.col(static_cast<long>(i)) =
            classifier_features(gen[i], reqs[i].mask, p.encoder, p.cfg.hf);
    data.train_labels = gen_labels;

    std::vector<const ManifestItem*> test_items;
    for (const auto* mi : manifest.split_items("test"))
        if (mi->spec.anomaly != Anomaly::missing) test_items.push_back(mi);
    require(!test_items.empty(), Errc::input, "dataset has no usable test scenes");
    data.test_features.resize(3 * p.encoder.cfg.dim, static_cast<long>(test_items.size()));
    data.test_labels.clear();
    for (std::size_t i = 0; i < test_items.size(); ++i) {
        const auto* mi = test_items[i];
        Image<Real> img = read_image_png<Real>(dataset_dir + "/" + mi->image_path);
        Mask mask = read_mask_png(dataset_dir + "/" + mi->mask_path);
        data.test_features.col(static_cast<long>(i)) =
            classifier_features(img, mask, p.encoder, p.cfg.hf);
        data.test_labels.push_back(static_cast<int>(mi->spec.shape));
    }

    // Separability oracle on real train-split features.
    std::vector<const ManifestItem*> real_train;
    for (const auto* mi : manifest.split_items("train"))
        if (mi->spec.anomaly != Anomaly::missing) real_train.push_back(mi);
    Mat<double> real_features(3 * p.encoder.cfg.dim, static_cast<long>(real_train.size()));
    std::vector<int> real_labels;
    for (std::size_t i = 0; i < real_train.size(); ++i) {
        const auto* mi = real_train[i];
        Image<Real> img = read_image_png<Real>(dataset_dir + "/" + mi->image_path);
        Mask mask = read_mask_png(dataset_dir + "/" + mi->mask_path);
        real_features.col(static_cast<long>(i)) =
            classifier_features(img, mask, p.encoder, p.cfg.hf);
        real_labels.push_back(static_cast<int>(mi->spec.shape));
    }
    data.separability = least_squares_separability(real_features, real_labels, kShapeCount);
    return data;
}

EvalReport cmd_evaluate(const std::string& checkpoint_base, const std::string& dataset_dir,
                        const std::string& out_json, ClassifierMetrics* downstream,
                        const LogFn& log) {
    AblationToggles toggles;
    Pipeline p = load_checkpoint(checkpoint_base, &toggles);
    DatasetManifest manifest = load_manifest(dataset_dir);

    EvalCounts counts{p.cfg.eval.samples_per_pairing, p.cfg.eval.pairings_per_shape,
                      p.cfg.eval.neutral_value};
    EvalReport report = evaluate_pipeline(p, toggles, manifest, dataset_dir, counts, log);

    DownstreamData data = build_downstream_data(p, manifest, dataset_dir, toggles,
                                                p.cfg.eval.downstream_per_class, log);
    ClassifierMetrics metrics = downstream_classify(data.train_features, data.train_labels,
                                                    data.test_features, data.test_labels,
                                                    kShapeCount);
    if (downstream) *downstream = metrics;

    nlohmann::json j = report.to_json();
    j["downstream"] = {{"separability_oracle", data.separability},
                       {"accuracy", metrics.accuracy},
                       {"precision", metrics.precision},
                       {"recall", metrics.recall},
                       {"f1", metrics.f1}};
    const fs::path out_path(out_json);
    if (out_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out_path.parent_path(), ec);
    }
    std::ofstream out(out_json, std::ios::binary);
    require(out.good(), Errc::io, "cannot open report for write: " + out_json);
    out << j.dump(2) << "\n";
    require(out.good(), Errc::io, "short write: " + out_json);
    return report;
}

std::string cmd_ablate(const RunConfig& cfg, const std::string& dataset_dir,
                       const std::string& out_csv, const LogFn& log) {
    const AblationToggles rows[5] = {
        {false, false, false, false},
        {true, false, false, false},
        {true, true, false, false},
        {true, true, true, false},
        {true, true, true, true},
    };

    RunConfig row_cfg = cfg;
    row_cfg.train.steps = cfg.ablation.train_steps;

    const fs::path csv_path(out_csv);
    if (csv_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(csv_path.parent_path(), ec);
    }
    const std::string work_base =
        (csv_path.has_parent_path() ? csv_path.parent_path() / "ablation" : fs::path("ablation"))
            .string();

    std::string csv = "config,identity_sim,masked_ssim,masked_perceptual\n";
    DatasetManifest manifest = load_manifest(dataset_dir);
    for (const auto& toggles : rows) {
        log_line(log, "{\"event\":\"ablation_row\",\"config\":\"" + toggles.name() + "\"}");
        const std::string base = work_base + "_" + toggles.name();
        cmd_train(row_cfg, dataset_dir, base, toggles, log);
        Pipeline p = load_checkpoint(base);
        EvalCounts counts{cfg.ablation.samples_per_pairing, cfg.ablation.pairings_per_shape,
                          cfg.eval.neutral_value};
        EvalReport report = evaluate_pipeline(p, toggles, manifest, dataset_dir, counts, log);
        char line[160];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f\n", toggles.name().c_str(),
                      report.identity_sim, report.masked_ssim, report.masked_perceptual);
        csv += line;
    }

    std::ofstream out(out_csv, std::ios::binary);
    require(out.good(), Errc::io, "cannot open csv for write: " + out_csv);
    out << csv;
    require(out.good(), Errc::io, "short write: " + out_csv);
    return csv;
}

}  // namespace stitchdiff
