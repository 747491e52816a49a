// stitchdiff command-line interface: dataset generation, training,
// composition, evaluation, and the component-toggle ablation driver.
// Logs are JSON lines on stdout; set STITCHDIFF_LOG=quiet to silence them.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "stitchdiff/pipeline.hpp"

namespace {

bool log_quiet() {
    const char* env = std::getenv("STITCHDIFF_LOG");
    return env != nullptr && std::string(env) == "quiet";
}

stitchdiff::LogFn make_logger() {
    if (log_quiet()) return nullptr;
    return [](const std::string& line) { std::printf("%s\n", line.c_str()); };
}

stitchdiff::RunConfig load_config(const std::string& path, std::uint64_t* seed_override,
                                  const stitchdiff::LogFn& log) {
    std::vector<std::string> defaulted;
    stitchdiff::RunConfig cfg = stitchdiff::RunConfig::load(path, &defaulted);
    if (seed_override) cfg.seed = *seed_override;
    if (log && !path.empty() && !defaulted.empty()) {
        nlohmann::json j;
        j["event"] = "config_defaults_applied";
        j["keys"] = defaulted;
        log(j.dump());
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stitchdiff: miniature diffusion object compositing testbed"};
    app.require_subcommand(1);

    std::string config_path, out_path, dataset_dir, checkpoint, background, mask_path, refs_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Global seed (overrides the config seed)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* mk = app.add_subcommand("make-dataset", "Render the synthetic dataset");
    mk->add_option("--config", config_path, "RunConfig JSON path");
    mk->add_option("--out", out_path, "Dataset output directory")->required();
    add_seed(mk);

    CLI::App* tr = app.add_subcommand("train", "Train the conditioned denoiser");
    tr->add_option("--config", config_path, "RunConfig JSON path");
    tr->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    tr->add_option("--out", out_path, "Checkpoint base path (writes .bin/.json)")->required();
    add_seed(tr);

    CLI::App* ge = app.add_subcommand("generate", "Compose one image from a checkpoint");
    ge->add_option("--checkpoint", checkpoint, "Checkpoint base path")->required();
    ge->add_option("--background", background, "Background PNG")->required();
    ge->add_option("--mask", mask_path, "Placement mask PNG")->required();
    ge->add_option("--refs", refs_dir, "Directory of 3-5 reference view PNGs")->required();
    ge->add_option("--out", out_path, "Output PNG path")->required();
    add_seed(ge);

    CLI::App* ev = app.add_subcommand("evaluate", "Run the evaluation protocol");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint base path")->required();
    ev->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    ev->add_option("--out", out_path, "Report JSON path")->required();

    CLI::App* ab = app.add_subcommand("ablate", "Run the 5-row component ablation");
    ab->add_option("--config", config_path, "RunConfig JSON path");
    ab->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    ab->add_option("--out", out_path, "Ablation CSV path")->required();
    add_seed(ab);

    CLI11_PARSE(app, argc, argv);

    stitchdiff::LogFn log = make_logger();
    auto fail_line = [](const std::string& code, const std::string& what) {
        nlohmann::json j;
        j["error"] = what;
        j["code"] = code;
        std::fprintf(stderr, "%s\n", j.dump().c_str());
        return 1;
    };

    try {
        if (mk->parsed()) {
            auto cfg = load_config(config_path, seed_given ? &seed : nullptr, log);
            const std::string manifest = stitchdiff::cmd_make_dataset(cfg, out_path);
            if (log) log("{\"event\":\"dataset_written\",\"manifest\":\"" + manifest + "\"}");
        } else if (tr->parsed()) {
            auto cfg = load_config(config_path, seed_given ? &seed : nullptr, log);
            stitchdiff::TrainResult result =
                stitchdiff::cmd_train(cfg, dataset_dir, out_path, {}, log);
            const auto& last = result.reports.back();
            nlohmann::json j = last.to_json(static_cast<long>(result.reports.size()) - 1);
            j["event"] = "train_done";
            j["checkpoint"] = result.checkpoint_base;
            if (log) log(j.dump());
        } else if (ge->parsed()) {
            const std::string out =
                stitchdiff::cmd_generate(checkpoint, background, mask_path, refs_dir, seed, out_path);
            if (log) log("{\"event\":\"generated\",\"image\":\"" + out + "\"}");
        } else if (ev->parsed()) {
            stitchdiff::ClassifierMetrics downstream;
            stitchdiff::EvalReport report =
                stitchdiff::cmd_evaluate(checkpoint, dataset_dir, out_path, &downstream, log);
            nlohmann::json j;
            j["event"] = "evaluate_done";
            j["identity_sim"] = report.identity_sim;
            j["masked_ssim"] = report.masked_ssim;
            j["masked_perceptual"] = report.masked_perceptual;
            j["downstream_accuracy"] = downstream.accuracy;
            j["report"] = out_path;
            if (log) log(j.dump());
        } else if (ab->parsed()) {
            auto cfg = load_config(config_path, seed_given ? &seed : nullptr, log);
            stitchdiff::cmd_ablate(cfg, dataset_dir, out_path, log);
            if (log) log("{\"event\":\"ablation_done\",\"csv\":\"" + out_path + "\"}");
        }
    } catch (const stitchdiff::Error& e) {
        return fail_line(stitchdiff::errc_name(e.code()), e.what());
    } catch (const std::exception& e) {
        return fail_line("internal", e.what());
    }
    return 0;
}
