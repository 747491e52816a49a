#include "stitchdiff/config.hpp"

#include <fstream>

namespace stitchdiff {

namespace {

/// Collects unknown keys (dotted paths) in `given` relative to the schema
/// implied by `defaults`, and the paths that fell back to defaults.
void walk(const nlohmann::json& defaults, const nlohmann::json& given, const std::string& prefix,
          nlohmann::json& merged, std::vector<std::string>& unknown,
          std::vector<std::string>* defaulted) {
    merged = defaults;
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!defaults.contains(it.key())) {
            unknown.push_back(path);
            continue;
        }
        const nlohmann::json& dv = defaults.at(it.key());
        if (dv.is_object()) {
            if (!it.value().is_object()) {
                unknown.push_back(path + " (expected an object)");
                continue;
            }
            nlohmann::json sub;
            walk(dv, it.value(), path, sub, unknown, defaulted);
            merged[it.key()] = sub;
        } else {
            const bool num_ok = dv.is_number() && it.value().is_number();
            if (!num_ok && dv.type() != it.value().type()) {
                unknown.push_back(path + " (wrong type)");
                continue;
            }
            merged[it.key()] = it.value();
        }
    }
    if (defaulted) {
        for (auto it = defaults.begin(); it != defaults.end(); ++it) {
            if (it.value().is_object()) continue;  // handled per leaf below
            if (!given.contains(it.key()))
                defaulted->push_back(prefix.empty() ? it.key() : prefix + "." + it.key());
        }
    }
}

}  // namespace

nlohmann::json RunConfig::default_json() {
    RunConfig d;
    return d.to_json();
}

nlohmann::json RunConfig::to_json() const {
    return {
        {"seed", seed},
        {"hf",
         {{"alpha", hf.alpha},
          {"beta", hf.beta},
          {"gamma", hf.gamma},
          {"canny_low", hf.canny_low},
          {"canny_high", hf.canny_high}}},
        {"encoder",
         {{"image_size", encoder.image_size},
          {"patch", encoder.patch},
          {"dim", encoder.dim},
          {"hidden", encoder.hidden}}},
        {"modulation",
         {{"time_dim", modulation.time_dim},
          {"embed_hidden", modulation.embed_hidden},
          {"ssvm_hidden", modulation.ssvm_hidden},
          {"fwvm_hidden", modulation.fwvm_hidden},
          {"favm_hidden", modulation.favm_hidden},
          {"mod_alpha", modulation.mod_alpha},
          {"mod_beta", modulation.mod_beta}}},
        {"denoiser", {{"base_width", denoiser_base_width}, {"temb_dim", denoiser_temb_dim}}},
        {"schedule",
         {{"T", schedule.T}, {"beta_start", schedule.beta_start}, {"beta_end", schedule.beta_end}}},
        {"loss",
         {{"ocr_gate_t", loss.ocr_gate_t},
          {"weight_vlb", loss.weight_vlb},
          {"weight_mse", loss.weight_mse},
          {"weight_ocr", loss.weight_ocr},
          {"masked_mse", loss.masked_mse}}},
        {"prior",
         {{"enabled", prior.enabled},
          {"lambda", prior.lambda},
          {"high_noise_t", prior.high_noise_t}}},
        {"train",
         {{"steps", train.steps},
          {"batch_size", train.batch_size},
          {"lr", train.lr},
          {"adam_beta1", train.adam_beta1},
          {"adam_beta2", train.adam_beta2},
          {"adam_eps", train.adam_eps}}},
        {"dataset", dataset.to_json()},
        {"eval",
         {{"samples_per_pairing", eval.samples_per_pairing},
          {"pairings_per_shape", eval.pairings_per_shape},
          {"neutral_value", eval.neutral_value},
          {"downstream_per_class", eval.downstream_per_class}}},
        {"ablation",
         {{"train_steps", ablation.train_steps},
          {"samples_per_pairing", ablation.samples_per_pairing},
          {"pairings_per_shape", ablation.pairings_per_shape}}},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j, std::vector<std::string>* defaulted) {
    require(j.is_object(), Errc::config, "config: document must be a JSON object");
    std::vector<std::string> unknown;
    nlohmann::json merged;
    walk(default_json(), j, "", merged, unknown, defaulted);
    if (!unknown.empty()) {
        std::string list;
        for (std::size_t i = 0; i < unknown.size(); ++i)
            list += (i ? ", " : "") + unknown[i];
        fail(Errc::config, "unknown keys: " + list);
    }

    RunConfig c;
    c.seed = merged.at("seed").get<std::uint64_t>();
    const auto& hf = merged.at("hf");
    c.hf.alpha = hf.at("alpha").get<double>();
    c.hf.beta = hf.at("beta").get<double>();
    c.hf.gamma = hf.at("gamma").get<double>();
    c.hf.canny_low = hf.at("canny_low").get<double>();
    c.hf.canny_high = hf.at("canny_high").get<double>();
    const auto& enc = merged.at("encoder");
    c.encoder.image_size = enc.at("image_size").get<int>();
    c.encoder.patch = enc.at("patch").get<int>();
    c.encoder.dim = enc.at("dim").get<int>();
    c.encoder.hidden = enc.at("hidden").get<int>();
    const auto& mod = merged.at("modulation");
    c.modulation.time_dim = mod.at("time_dim").get<int>();
    c.modulation.embed_hidden = mod.at("embed_hidden").get<int>();
    c.modulation.ssvm_hidden = mod.at("ssvm_hidden").get<int>();
    c.modulation.fwvm_hidden = mod.at("fwvm_hidden").get<int>();
    c.modulation.favm_hidden = mod.at("favm_hidden").get<int>();
    c.modulation.mod_alpha = mod.at("mod_alpha").get<double>();
    c.modulation.mod_beta = mod.at("mod_beta").get<double>();
    c.denoiser_base_width = merged.at("denoiser").at("base_width").get<int>();
    c.denoiser_temb_dim = merged.at("denoiser").at("temb_dim").get<int>();
    const auto& sch = merged.at("schedule");
    c.schedule.T = sch.at("T").get<int>();
    c.schedule.beta_start = sch.at("beta_start").get<double>();
    c.schedule.beta_end = sch.at("beta_end").get<double>();
    const auto& loss = merged.at("loss");
    c.loss.ocr_gate_t = loss.at("ocr_gate_t").get<int>();
    c.loss.weight_vlb = loss.at("weight_vlb").get<double>();
    c.loss.weight_mse = loss.at("weight_mse").get<double>();
    c.loss.weight_ocr = loss.at("weight_ocr").get<double>();
    c.loss.masked_mse = loss.at("masked_mse").get<bool>();
    const auto& prior = merged.at("prior");
    c.prior.enabled = prior.at("enabled").get<bool>();
    c.prior.lambda = prior.at("lambda").get<double>();
    c.prior.high_noise_t = prior.at("high_noise_t").get<int>();
    const auto& train = merged.at("train");
    c.train.steps = train.at("steps").get<int>();
    c.train.batch_size = train.at("batch_size").get<int>();
    c.train.lr = train.at("lr").get<double>();
    c.train.adam_beta1 = train.at("adam_beta1").get<double>();
    c.train.adam_beta2 = train.at("adam_beta2").get<double>();
    c.train.adam_eps = train.at("adam_eps").get<double>();
    c.dataset = DatasetConfig::from_json(merged.at("dataset"));
    const auto& ev = merged.at("eval");
    c.eval.samples_per_pairing = ev.at("samples_per_pairing").get<int>();
    c.eval.pairings_per_shape = ev.at("pairings_per_shape").get<int>();
    c.eval.neutral_value = ev.at("neutral_value").get<double>();
    c.eval.downstream_per_class = ev.at("downstream_per_class").get<int>();
    const auto& ab = merged.at("ablation");
    c.ablation.train_steps = ab.at("train_steps").get<int>();
    c.ablation.samples_per_pairing = ab.at("samples_per_pairing").get<int>();
    c.ablation.pairings_per_shape = ab.at("pairings_per_shape").get<int>();

    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path, std::vector<std::string>* defaulted) {
    if (path.empty()) return from_json(nlohmann::json::object(), defaulted);
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io, "cannot open config: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    require(!j.is_discarded(), Errc::config, "config is not valid JSON: " + path);
    return from_json(j, defaulted);
}

void RunConfig::validate() const {
    hf.validate();
    encoder.validate();
    modulation.validate();
    denoiser_config().validate();
    require(schedule.T >= 2, Errc::config, "config: schedule.T must be >= 2");
    require(schedule.beta_start > 0 && schedule.beta_start <= schedule.beta_end &&
                schedule.beta_end < 1,
            Errc::config, "config: schedule betas out of range");
    loss.validate(schedule.T);
    prior.validate(schedule.T);
    require(train.steps > 0 && train.batch_size > 0 && train.lr > 0, Errc::config,
            "config: train.steps, batch_size, lr must be positive");
    dataset.validate();
    require(dataset.image_size == encoder.image_size, Errc::config,
            "config: dataset.image_size must equal encoder.image_size");
    require(eval.samples_per_pairing > 0 && eval.pairings_per_shape > 0 &&
                eval.downstream_per_class > 0,
            Errc::config, "config: eval counts must be positive");
    require(eval.neutral_value >= 0 && eval.neutral_value <= 1, Errc::config,
            "config: eval.neutral_value must be in [0,1]");
    require(ablation.train_steps > 0 && ablation.samples_per_pairing > 0 &&
                ablation.pairings_per_shape > 0,
            Errc::config, "config: ablation counts must be positive");
}

}  // namespace stitchdiff
