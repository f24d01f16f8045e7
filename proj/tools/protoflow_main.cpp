#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "protoflow/error.hpp"
#include "protoflow/pipeline.hpp"

using protoflow::pipeline::RunConfig;

namespace {

struct CliFlags {
    std::string config, data, manifest, checkpoint, out, video;
    std::uint64_t seed = 0;
    int window = 0, epochs = 0, k = 0, threads = 0, frame = -1;
    std::string gen_preset;
};

RunConfig resolve(const CLI::App& cmd, const CliFlags& f) {
    RunConfig cfg;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw protoflow::IoError("cannot open config " + f.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw protoflow::DataError("config " + f.config + ": " + e.what());
        }
        cfg = RunConfig::from_json(j);
    }
    auto given = [&cmd](const std::string& name) {
        const CLI::Option* o = cmd.get_option_no_throw(name);
        return o && o->count() > 0;
    };
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--window")) cfg.window = f.window;
    if (given("--threads")) cfg.threads = f.threads;
    if (given("--data")) cfg.data = f.data;
    if (given("--manifest")) cfg.manifest = f.manifest;
    if (given("--checkpoint")) cfg.checkpoint = f.checkpoint;
    if (given("--out")) cfg.out = f.out;
    if (given("--epochs")) {
        cfg.train.pretrain_epochs = f.epochs;
        cfg.train.finetune_epochs = f.epochs;
    }
    if (given("--k")) cfg.train.k = f.k;
    if (given("--preset")) {
        cfg.gen_preset = f.gen_preset;
        cfg.gen = cfg.gen_preset == "fewshot" ? protoflow::sg::GeneratorConfig::fewshot_variant()
                                              : protoflow::sg::GeneratorConfig::defaults();
    }
    if (given("--video")) cfg.explain_video = f.video;
    if (given("--frame")) cfg.explain_frame = f.frame;

    if (const char* env_out = std::getenv("PROTOFLOW_OUT"); env_out && *env_out)
        cfg.out = env_out;
    if (cfg.out.empty()) throw protoflow::DataError("missing --out directory");
    return cfg;
}

void add_common(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags override its values");
    cmd->add_option("--seed", f.seed, "root RNG seed");
    cmd->add_option("--window", f.window, "temporal window size w");
    cmd->add_option("--epochs", f.epochs, "max epochs for both training stages");
    cmd->add_option("--k", f.k, "prototypes per class");
    cmd->add_option("--data", f.data, "dataset JSONL path");
    cmd->add_option("--manifest", f.manifest, "split manifest JSON path");
    cmd->add_option("--checkpoint", f.checkpoint, "input checkpoint path");
    cmd->add_option("--out", f.out, "output directory (PROTOFLOW_OUT overrides)");
    cmd->add_option("--threads", f.threads, "worker thread cap (default 1)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ProtoFlow: prototype-based workflow recognition on dynamic scene graphs"};
    app.require_subcommand(1);

    CliFlags f;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--preset", f.gen_preset, "generator preset: default|fewshot");
    CLI::App* pre = app.add_subcommand("pretrain", "stage 1: autoencoder + head pretraining");
    CLI::App* init = app.add_subcommand("init-prototypes", "stage 2: per-class k-means prototypes");
    CLI::App* fine = app.add_subcommand("finetune", "stage 3: prototype-regularized fine-tuning");
    CLI::App* eval = app.add_subcommand("evaluate", "stage 4: test-split metrics and embedding export");
    CLI::App* few = app.add_subcommand("fewshot", "few-shot benchmark vs the head-only baseline");
    CLI::App* sweep = app.add_subcommand("sweep-window", "train/evaluate across temporal window sizes");
    CLI::App* expl = app.add_subcommand("explain", "distance trace + node outliers for one video");
    expl->add_option("--video", f.video, "video id to explain");
    expl->add_option("--frame", f.frame, "frame to analyze (default: most deviant)");

    for (CLI::App* cmd : {gen, pre, init, fine, eval, few, sweep, expl})
        add_common(cmd, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        using namespace protoflow::pipeline;
        if (gen->parsed()) run_gen_data(resolve(*gen, f));
        else if (pre->parsed()) run_pretrain(resolve(*pre, f));
        else if (init->parsed()) run_init_prototypes(resolve(*init, f));
        else if (fine->parsed()) run_finetune(resolve(*fine, f));
        else if (eval->parsed()) run_evaluate(resolve(*eval, f));
        else if (few->parsed()) run_fewshot(resolve(*few, f));
        else if (sweep->parsed()) run_sweep(resolve(*sweep, f));
        else if (expl->parsed()) run_explain(resolve(*expl, f));
    } catch (const protoflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
