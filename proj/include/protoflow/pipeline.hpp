#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoflow/evalx.hpp"
#include "protoflow/flow.hpp"
#include "protoflow/synthetic.hpp"

// Run orchestration behind the CLI subcommands. Everything here writes the
// same artifacts whether driven from the command line or from tests, so a
// run directory is reproducible from its echoed run_config.json alone.

namespace protoflow::pipeline {

struct RunConfig {
    std::uint64_t seed = 42;
    int window = 5;
    int threads = 1;

    std::string data, manifest, checkpoint, out;

    std::string gen_preset = "default";  // "default" or "fewshot"
    sg::GeneratorConfig gen = sg::GeneratorConfig::defaults();

    flow::TrainConfig train;

    // encoder knobs; CLI defaults are the desk-scale dims, the paper-scale
    // 1024/512 is one flag away
    int num_layers = 3;
    int hidden_dim = 128;
    int encoding_dim = 64;
    int heads = 1;
    double leaky_slope = 0.2;
    int edge_embed_dim = 16;
    int w_max = 8;

    std::string explain_video;
    int explain_frame = -1;

    std::vector<std::size_t> fewshot_n = {1, 2, 5};
    std::vector<std::uint64_t> run_seeds = {1, 2, 3};
    std::vector<int> sweep_windows = {1, 5, 10, 20, 30, 60};

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    model::EncoderConfig encoder_config(int input_dim) const;
    sg::FeatureSpec feature_spec(const sg::DatasetManifest& m) const;
};

// resolved config echo; written before a run executes
void write_run_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

struct LoadedData {
    sg::Dataset dataset;
    sg::DatasetManifest manifest;
};
LoadedData load_data(const RunConfig& cfg);

// subcommand bodies; each creates cfg.out and echoes run_config.json
void run_gen_data(const RunConfig& cfg);
void run_pretrain(const RunConfig& cfg);
void run_init_prototypes(const RunConfig& cfg);
void run_finetune(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);
void run_fewshot(const RunConfig& cfg);
void run_sweep(const RunConfig& cfg);
void run_explain(const RunConfig& cfg);

// full in-memory pipeline on prebuilt data; used by sweeps, the few-shot
// harness and the acceptance suite
struct FullRunResult {
    model::ModelParams params;
    model::PrototypeSet protos;
    evalx::MetricsSummary test_metrics;
    std::vector<flow::LossReport> pretrain_history, finetune_history;
};
FullRunResult run_full(const sg::Dataset& dataset, const sg::DatasetManifest& manifest,
                       const model::EncoderConfig& enc_cfg, const flow::TrainConfig& cfg,
                       const sg::FeatureSpec& spec);

}  // namespace protoflow::pipeline
